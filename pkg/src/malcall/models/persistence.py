"""Versioned JSON container for trained models."""

from __future__ import annotations

import json

import numpy as np

FORMAT = "malcall-model"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """A model payload is corrupt, truncated or of an unsupported version."""


def serialize_model(model) -> bytes:
    """Encode a fitted model as UTF-8 JSON.

    Floats go through ``repr`` round-tripping in :mod:`json`, so scores of
    the restored model are bit-identical.
    """
    payload = {
        "format": FORMAT,
        "version": FORMAT_VERSION,
        "kind": model.kind,
        "params": model.get_params(deep=False),
        "n_features_in": int(model.n_features_in_),
        "schema_fingerprint": model.schema_fingerprint_,
        "state": model._state(),
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False).encode()


def deserialize_model(data: bytes):
    from . import MODEL_KINDS

    try:
        payload = json.loads(data.decode() if isinstance(data, (bytes, bytearray)) else data)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"corrupt model payload: {exc}") from None
    if not isinstance(payload, dict) or payload.get("format") != FORMAT:
        raise ModelFormatError("corrupt model payload: not a model container")
    if payload.get("version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {payload.get('version')!r}, expected {FORMAT_VERSION}")
    try:
        cls = MODEL_KINDS[payload["kind"]]
        model = cls(**payload["params"])
        model.classes_ = np.array([0, 1])
        model.n_features_in_ = int(payload["n_features_in"])
        model.schema_fingerprint_ = payload["schema_fingerprint"]
        model._load_state(payload["state"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"corrupt model payload: {exc!r}") from None
    return model


def save_model(model, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_model(model))


def load_model(path):
    with open(path, "rb") as fh:
        return deserialize_model(fh.read())
