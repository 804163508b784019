"""Linear scorers: L2-regularised logistic regression and a linear SVM."""

from __future__ import annotations

import numpy as np

from .base import ScoringModel, sigmoid


def logistic_loss_grad(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, alpha: float):
    """Mean log-loss plus ``alpha/2 * ||w||^2`` and its gradient in ``(w, b)``."""
    z = X @ w + b
    # log(1 + exp(-z)) for y=1, log(1 + exp(z)) for y=0, computed stably
    loss = np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * alpha * (w @ w)
    r = sigmoid(z) - y
    n = len(y)
    return loss, X.T @ r / n + alpha * w, r.sum() / n


class LogisticRegressionGD(ScoringModel):
    """Logistic regression ``p = sigmoid(w.x + b)`` fit by full-batch gradient descent.

    Uses Nesterov momentum with the fixed step ``1/L`` (``L`` the gradient
    Lipschitz bound) and stops once the gradient norm drops below ``tol``.
    The bias is not penalised.
    """

    kind = "logistic"

    def __init__(self, alpha=1e-4, max_iter=3000, tol=1e-6):
        self.alpha = alpha
        self.max_iter = max_iter
        self.tol = tol

    def _fit(self, X, y):
        n, d = X.shape
        Xb = np.hstack([X, np.ones((n, 1))])
        lipschitz = 0.25 * np.linalg.norm(Xb, 2) ** 2 / n + self.alpha
        step = 1.0 / lipschitz
        theta = np.zeros(d + 1)
        prev = theta.copy()
        self.n_iter_ = 0
        for it in range(1, self.max_iter + 1):
            look = theta + (it - 1.0) / (it + 2.0) * (theta - prev)
            _, gw, gb = logistic_loss_grad(look[:d], look[d], X, y, self.alpha)
            prev = theta
            theta = look - step * np.append(gw, gb)
            self.n_iter_ = it
            _, gw, gb = logistic_loss_grad(theta[:d], theta[d], X, y, self.alpha)
            if np.sqrt(gw @ gw + gb * gb) < self.tol:
                break
        self.coef_ = theta[:d]
        self.intercept_ = float(theta[d])

    def _score(self, X):
        return sigmoid(X @ self.coef_ + self.intercept_)

    def _state(self):
        return {"coef": self.coef_.tolist(), "intercept": self.intercept_}

    def _load_state(self, state):
        self.coef_ = np.asarray(state["coef"], dtype=float)
        self.intercept_ = float(state["intercept"])


class LinearSVM(ScoringModel):
    """Linear soft-margin SVM trained by deterministic full-batch subgradient descent.

    Inputs are standardised with the training mean and standard deviation,
    then ``alpha/2 * ||v||^2 + mean(max(0, 1 - y' (v.z + c)))`` is minimised
    over the standardised inputs ``z`` with ``y'`` in {-1, +1}. The step
    size is ``eta0 / sqrt(t)`` divided by twice the mean squared row norm and
    the returned solution averages the second half of the iterates. The
    weights are mapped back to the raw inputs, so the score is the raw
    margin ``w.x + b``.
    """

    kind = "svm"
    probabilistic = False

    def __init__(self, alpha=1e-4, n_iter=1000, eta0=1.0):
        self.alpha = alpha
        self.n_iter = n_iter
        self.eta0 = eta0

    def _fit(self, X, y):
        n, d = X.shape
        self.mean_ = X.mean(axis=0)
        scale = X.std(axis=0)
        self.scale_ = np.where(scale > 0, scale, 1.0)
        Z = (X - self.mean_) / self.scale_
        ys = 2.0 * y - 1.0
        Za = np.hstack([Z, np.ones((n, 1))])
        norm = 2.0 * np.einsum("ij,ij->i", Za, Za).mean()
        theta = np.zeros(d + 1)
        avg = np.zeros(d + 1)
        burn = self.n_iter // 2
        for t in range(1, self.n_iter + 1):
            margins = ys * (Za @ theta)
            active = margins < 1.0
            grad = -(Za[active].T @ ys[active]) / n
            grad[:d] += self.alpha * theta[:d]
            theta = theta - self.eta0 / (np.sqrt(t) * norm) * grad
            if t > burn:
                avg += theta
        theta = avg / (self.n_iter - burn)
        self.coef_ = theta[:d] / self.scale_
        self.intercept_ = float(theta[d] - self.coef_ @ self.mean_)

    def objective(self, X, y) -> float:
        """Training objective; the penalty is on the standardised-space weights."""
        ys = 2.0 * np.asarray(y, dtype=float) - 1.0
        margins = ys * (np.asarray(X, dtype=float) @ self.coef_ + self.intercept_)
        v = self.coef_ * self.scale_
        return float(0.5 * self.alpha * v @ v + np.maximum(0.0, 1.0 - margins).mean())

    def _score(self, X):
        return X @ self.coef_ + self.intercept_

    def _state(self):
        return {
            "coef": self.coef_.tolist(),
            "intercept": self.intercept_,
            "mean": self.mean_.tolist(),
            "scale": self.scale_.tolist(),
        }

    def _load_state(self, state):
        self.coef_ = np.asarray(state["coef"], dtype=float)
        self.intercept_ = float(state["intercept"])
        self.mean_ = np.asarray(state["mean"], dtype=float)
        self.scale_ = np.asarray(state["scale"], dtype=float)
