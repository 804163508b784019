"""Feature subsets and the raw-features -> numeric-vector encoding."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .extract import CURRENT_FEATURES, FEATURE_NAMES, HISTORIC_FEATURES, RAW_COLUMNS, RawFeatures

STATIC_CURRENT = ("is_in_contact", "weekday", "hour", "same_location")
STATIC_HISTORIC = tuple(
    "hist_" + n for n in ("is_in_contact", "call_type", "duration", "weekday", "hour", "same_location")
)
STATIC_FEATURES = STATIC_CURRENT + STATIC_HISTORIC
CROSSREF_FEATURES = tuple(f for f in FEATURE_NAMES if f not in STATIC_FEATURES)

ONE_HOT_WIDTH = {"weekday": 7, "hour": 24}
BINARY = ("is_in_contact", "same_location")
_COLUMN = {name: i for i, name in enumerate(RAW_COLUMNS)}


def feature_encoding(name: str) -> tuple[str, int]:
    if name in ONE_HOT_WIDTH:
        return "onehot", ONE_HOT_WIDTH[name]
    if name in BINARY:
        return "binary", 1
    return "log1p", 1


@dataclass(frozen=True)
class FeatureSelector:
    """A named subset of the 29 features, kept in canonical order."""

    name: str
    features: tuple[str, ...]

    def __post_init__(self):
        unknown = [f for f in self.features if f not in FEATURE_NAMES]
        if unknown:
            raise ValueError(f"unknown features: {unknown}")
        if len(set(self.features)) != len(self.features):
            raise ValueError("duplicate features in selector")
        ordered = tuple(f for f in FEATURE_NAMES if f in set(self.features))
        object.__setattr__(self, "features", ordered)

    def __len__(self) -> int:
        return len(self.features)

    @property
    def uses_history(self) -> bool:
        return any(f in HISTORIC_FEATURES for f in self.features)

    @classmethod
    def all(cls) -> "FeatureSelector":
        return cls("all", FEATURE_NAMES)

    @classmethod
    def no_historic(cls) -> "FeatureSelector":
        return cls("no_historic", CURRENT_FEATURES)

    @classmethod
    def no_crossref(cls) -> "FeatureSelector":
        return cls("no_crossref", STATIC_FEATURES)

    @classmethod
    def basic(cls) -> "FeatureSelector":
        return cls("basic", STATIC_CURRENT)

    @classmethod
    def top10(cls, features: Sequence[str]) -> "FeatureSelector":
        if len(set(features)) != 10:
            raise ValueError(f"top10 needs exactly 10 distinct features, got {len(set(features))}")
        return cls("top10", tuple(features))

    @classmethod
    def custom(cls, mask: Sequence[bool] | Sequence[str], name: str = "custom") -> "FeatureSelector":
        mask = list(mask)
        if mask and all(isinstance(m, (bool, np.bool_)) for m in mask):
            if len(mask) != len(FEATURE_NAMES):
                raise ValueError(f"mask must have {len(FEATURE_NAMES)} entries")
            return cls(name, tuple(f for f, keep in zip(FEATURE_NAMES, mask) if keep))
        return cls(name, tuple(mask))

    @classmethod
    def parse(cls, spec) -> "FeatureSelector":
        """Build from a name (``"all"``, ``"basic"``, ...), a feature list, or a dict."""
        if isinstance(spec, FeatureSelector):
            return spec
        if isinstance(spec, str):
            named = {"all": cls.all, "no_historic": cls.no_historic, "no_crossref": cls.no_crossref, "basic": cls.basic}
            if spec not in named:
                raise ValueError(f"unknown selector {spec!r}")
            return named[spec]()
        if isinstance(spec, dict):
            name = spec.get("name", "custom")
            if name in ("all", "no_historic", "no_crossref", "basic") and "features" not in spec:
                return cls.parse(name)
            if name == "top10":
                return cls.top10(spec["features"])
            return cls.custom(spec["features"], name=name)
        return cls.custom(list(spec))

    def to_dict(self) -> dict:
        return {"name": self.name, "features": list(self.features)}


@dataclass(frozen=True)
class SchemaEntry:
    feature: str
    encoding: str
    width: int


@dataclass(frozen=True)
class Schema:
    entries: tuple[SchemaEntry, ...]

    @classmethod
    def for_selector(cls, selector: FeatureSelector) -> "Schema":
        names = list(selector.features)
        if selector.uses_history:
            names.append("history_len")
        return cls(tuple(SchemaEntry(n, *feature_encoding(n)) for n in names))

    @property
    def width(self) -> int:
        return sum(e.width for e in self.entries)

    @property
    def columns(self) -> list[str]:
        cols = []
        for e in self.entries:
            if e.encoding == "onehot":
                cols.extend(f"{e.feature}={k}" for k in range(e.width))
            else:
                cols.append(e.feature)
        return cols

    def column_features(self) -> list[str]:
        """Source feature of every encoded column."""
        out = []
        for e in self.entries:
            out.extend([e.feature] * e.width)
        return out

    def to_list(self) -> list:
        return [[e.feature, e.encoding, e.width] for e in self.entries]

    @classmethod
    def from_list(cls, items: Iterable) -> "Schema":
        return cls(tuple(SchemaEntry(f, enc, int(w)) for f, enc, w in items))

    @property
    def fingerprint(self) -> str:
        blob = json.dumps(self.to_list(), separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class EncodedVector:
    values: np.ndarray
    schema: Schema


def encode_matrix(raw: np.ndarray, schema: Schema) -> np.ndarray:
    """Encode raw rows (columns in ``RAW_COLUMNS`` order) according to ``schema``."""
    raw = np.asarray(raw, dtype=float)
    if raw.ndim == 1:
        raw = raw[None, :]
    n = raw.shape[0]
    out = np.zeros((n, schema.width))
    rows = np.arange(n)
    col = 0
    for e in schema.entries:
        src = raw[:, _COLUMN[e.feature]]
        if e.encoding == "onehot":
            idx = src.astype(np.int64)
            if np.any((idx < 0) | (idx >= e.width)):
                raise ValueError(f"{e.feature} out of one-hot range [0, {e.width})")
            out[rows, col + idx] = 1.0
        elif e.encoding == "binary":
            out[:, col] = src != 0
        else:
            out[:, col] = np.log1p(src)
        col += e.width
    return out


def encode(raw: RawFeatures, selector: FeatureSelector) -> EncodedVector:
    schema = Schema.for_selector(selector)
    return EncodedVector(encode_matrix(raw.to_array(), schema)[0], schema)


def decode(vector: EncodedVector | np.ndarray, schema: Schema | None = None) -> dict[str, float]:
    """Recover the retained raw values from an encoded vector."""
    if isinstance(vector, EncodedVector):
        values, schema = vector.values, vector.schema
    else:
        values = np.asarray(vector, dtype=float)
    out: dict[str, float] = {}
    col = 0
    for e in schema.entries:
        seg = values[col : col + e.width]
        if e.encoding == "onehot":
            out[e.feature] = int(np.argmax(seg))
        elif e.encoding == "binary":
            out[e.feature] = int(seg[0])
        else:
            out[e.feature] = float(np.expm1(seg[0]))
        col += e.width
    return out


def _as_raw_matrix(X) -> np.ndarray:
    if isinstance(X, RawFeatures):
        return X.to_array()[None, :]
    if isinstance(X, (list, tuple)) and X and isinstance(X[0], RawFeatures):
        return np.vstack([r.to_array() for r in X])
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != len(RAW_COLUMNS):
        raise ValueError(f"expected raw rows with {len(RAW_COLUMNS)} columns, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("raw features contain NaN or infinity")
    return arr


class FeatureEncoder(TransformerMixin, BaseEstimator):
    """Scikit-learn transformer from raw feature rows to encoded vectors.

    Parameters
    ----------
    selector : str, list or FeatureSelector, default="all"
        Which of the 29 features to keep.
    """

    def __init__(self, selector="all"):
        self.selector = selector

    def fit(self, X=None, y=None):
        if X is not None:
            _as_raw_matrix(X)
        sel = FeatureSelector.parse(self.selector)
        self.selector_ = sel
        self.schema_ = Schema.for_selector(sel)
        self.n_features_in_ = len(RAW_COLUMNS)
        return self

    def transform(self, X):
        check_is_fitted(self, "schema_")
        return encode_matrix(_as_raw_matrix(X), self.schema_)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "schema_")
        return np.asarray(self.schema_.columns, dtype=object)
