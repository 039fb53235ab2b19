"""L2-penalized logistic regression, fit by damped Newton iterations."""
from __future__ import annotations

import numpy as np


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def loss_and_gradient(w: np.ndarray, X: np.ndarray, y: np.ndarray,
                      l2: float) -> tuple[float, np.ndarray]:
    """Penalized negative log-likelihood and its gradient.

    ``X`` already carries the intercept in column 0, which the penalty
    skips. Uses log1p-style accumulation, so extreme margins do not
    overflow.
    """
    z = X @ w
    nll = float(np.sum(np.logaddexp(0.0, z) - y * z))
    nll += 0.5 * l2 * float(np.dot(w[1:], w[1:]))
    grad = X.T @ (sigmoid(z) - y)
    grad[1:] += l2 * w[1:]
    return nll, grad


class LogisticRegressionModel:
    """Newton's method with step halving; the intercept is never penalized.

    Stops when the gradient norm drops to ``tol`` or after ``max_iter``
    Newton steps. Accepted steps never increase the penalized loss.
    """

    def __init__(self, l2: float = 1.0, tol: float = 1e-6, max_iter: int = 500):
        self.l2 = float(l2)
        self.tol = float(tol)
        self.max_iter = int(max_iter)
        self.weights_: np.ndarray | None = None
        self.converged_ = False
        self.n_iter_ = 0
        self.loss_path_: list[float] = []

    def fit(self, X: np.ndarray, y: np.ndarray, w0: np.ndarray | None = None):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValueError("X and y shapes disagree")
        classes = np.unique(y)
        if not np.all(np.isin(classes, (0.0, 1.0))):
            raise ValueError("labels must be 0/1")
        if classes.size < 2:
            raise ValueError("training labels contain a single class")

        n, d = X.shape
        Xa = np.hstack([np.ones((n, 1)), X])
        w = np.zeros(d + 1) if w0 is None else np.asarray(w0, dtype=np.float64).copy()
        loss, grad = loss_and_gradient(w, Xa, y, self.l2)
        self.loss_path_ = [loss]
        self.converged_ = False

        for it in range(self.max_iter):
            if np.linalg.norm(grad) <= self.tol:
                self.converged_ = True
                break
            p = sigmoid(Xa @ w)
            weights = np.maximum(p * (1.0 - p), 1e-12)
            H = Xa.T @ (Xa * weights[:, None])
            H[1:, 1:] += self.l2 * np.eye(d)
            try:
                step = np.linalg.solve(H, -grad)
            except np.linalg.LinAlgError:
                H[np.diag_indices_from(H)] += 1e-10
                step = np.linalg.solve(H, -grad)
            t = 1.0
            new_loss, new_grad = loss_and_gradient(w + t * step, Xa, y, self.l2)
            while new_loss > loss and t > 1e-12:
                t *= 0.5
                new_loss, new_grad = loss_and_gradient(w + t * step, Xa, y, self.l2)
            if new_loss > loss:
                break  # no descent direction left
            w = w + t * step
            loss, grad = new_loss, new_grad
            self.loss_path_.append(loss)
            self.n_iter_ = it + 1
        else:
            self.n_iter_ = self.max_iter
        if np.linalg.norm(grad) <= self.tol:
            self.converged_ = True

        self.weights_ = w
        return self

    @property
    def intercept_(self) -> float:
        return float(self.weights_[0])

    @property
    def coef_(self) -> np.ndarray:
        return self.weights_[1:]

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        if self.weights_ is None:
            raise ValueError("model is not fitted")
        X = np.asarray(X, dtype=np.float64)
        return X @ self.weights_[1:] + self.weights_[0]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return sigmoid(self.decision_function(X))
