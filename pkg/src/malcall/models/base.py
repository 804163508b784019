"""Shared estimator plumbing for the scoring models."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y


class SchemaMismatchError(ValueError):
    """Input vectors were encoded with a different schema than the model."""


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class ScoringModel(ClassifierMixin, BaseEstimator):
    """Binary classifier emitting a real-valued maliciousness score.

    Subclasses implement ``_fit`` and ``_score``. ``fit`` optionally records
    the schema fingerprint of the encoded inputs; scoring through
    :func:`predict_score` with a schema then refuses mismatched vectors.
    """

    kind = "base"
    probabilistic = True

    def fit(self, X, y, schema=None):
        X, y = check_X_y(X, y, dtype=np.float64)
        labels = np.unique(y)
        if not np.all(np.isin(labels, (0, 1))):
            raise ValueError(f"labels must be 0/1, got {labels}")
        if len(labels) < 2:
            raise ValueError("training data contains a single class")
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        self.schema_fingerprint_ = getattr(schema, "fingerprint", schema)
        self._fit(X, y.astype(np.float64))
        return self

    def _validate(self, X) -> np.ndarray:
        check_is_fitted(self, "n_features_in_")
        X = check_array(X, dtype=np.float64, ensure_2d=False)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features_in_:
            raise SchemaMismatchError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        return X

    def predict_score(self, X) -> np.ndarray:
        return self._score(self._validate(X))

    def decision_function(self, X) -> np.ndarray:
        return self.predict_score(X)

    def predict_proba(self, X) -> np.ndarray:
        if not self.probabilistic:
            raise AttributeError(f"{type(self).__name__} does not produce probabilities")
        p = self.predict_score(X)
        return np.column_stack([1.0 - p, p])

    def predict(self, X, threshold: float | None = None) -> np.ndarray:
        if threshold is None:
            threshold = 0.5 if self.probabilistic else 0.0
        return (self.predict_score(X) >= threshold).astype(np.int64)

    # persistence hooks
    def _state(self) -> dict:
        raise NotImplementedError

    def _load_state(self, state: dict) -> None:
        raise NotImplementedError


def predict_score(model: ScoringModel, X, schema=None) -> np.ndarray:
    """Score encoded vectors, refusing them if their schema is not the model's."""
    if schema is not None:
        expected = getattr(model, "schema_fingerprint_", None)
        got = getattr(schema, "fingerprint", schema)
        if expected is not None and expected != got:
            raise SchemaMismatchError(f"model expects schema {expected}, vectors use {got}")
    return model.predict_score(X)
