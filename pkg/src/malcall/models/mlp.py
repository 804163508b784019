"""Two-layer ReLU network with a 2-way softmax output."""

from __future__ import annotations

import numpy as np

from .base import ScoringModel


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def mlp_forward(params: dict, X: np.ndarray) -> np.ndarray:
    """Class probabilities ``softmax(W1 relu(W2 x + b2) + b1)``, shape (n, 2)."""
    h = np.maximum(0.0, X @ params["W2"].T + params["b2"])
    return _softmax(h @ params["W1"].T + params["b1"])


def mlp_loss_grad(params: dict, X: np.ndarray, y: np.ndarray):
    """Mean cross-entropy and its gradient with respect to every parameter."""
    n = X.shape[0]
    a = X @ params["W2"].T + params["b2"]
    h = np.maximum(0.0, a)
    logits = h @ params["W1"].T + params["b1"]
    z = logits - logits.max(axis=1, keepdims=True)
    log_p = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    yi = y.astype(np.int64)
    loss = -log_p[np.arange(n), yi].mean()
    d_logits = np.exp(log_p)
    d_logits[np.arange(n), yi] -= 1.0
    d_logits /= n
    d_h = d_logits @ params["W1"]
    d_a = d_h * (a > 0)
    grads = {
        "W1": d_logits.T @ h,
        "b1": d_logits.sum(axis=0),
        "W2": d_a.T @ X,
        "b2": d_a.sum(axis=0),
    }
    return loss, grads


class MLPClassifier(ScoringModel):
    """Feed-forward network with one hidden ReLU layer trained by mini-batch SGD."""

    kind = "mlp"

    def __init__(self, hidden=20, epochs=50, batch_size=64, learning_rate=0.05, random_state=0):
        self.hidden = hidden
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.random_state = random_state

    def init_params(self, n_features: int, rng: np.random.Generator) -> dict:
        def xavier(fan_out, fan_in):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            return rng.uniform(-limit, limit, size=(fan_out, fan_in))

        return {
            "W2": xavier(self.hidden, n_features),
            "b2": np.zeros(self.hidden),
            "W1": xavier(2, self.hidden),
            "b1": np.zeros(2),
        }

    def _fit(self, X, y):
        rng = np.random.default_rng(self.random_state)
        params = self.init_params(X.shape[1], rng)
        n = X.shape[0]
        self.loss_curve_ = []
        for epoch in range(self.epochs):
            order = rng.permutation(n)
            total = 0.0
            for start in range(0, n, self.batch_size):
                batch = order[start : start + self.batch_size]
                loss, grads = mlp_loss_grad(params, X[batch], y[batch])
                if not np.isfinite(loss):
                    raise FloatingPointError(
                        f"non-finite loss at epoch {epoch}, batch offset {start} "
                        f"(learning_rate={self.learning_rate}, max |W2|={np.abs(params['W2']).max():.3g})"
                    )
                for key, g in grads.items():
                    params[key] -= self.learning_rate * g
                total += loss * len(batch)
            self.loss_curve_.append(total / n)
        self.params_ = params

    def _score(self, X):
        return mlp_forward(self.params_, X)[:, 1]

    def _state(self):
        return {k: v.tolist() for k, v in self.params_.items()}

    def _load_state(self, state):
        self.params_ = {k: np.asarray(v, dtype=float) for k, v in state.items()}
