"""Majority-class and autoregressive-label baselines."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..metrics import LAG_ORDER, LabeledExample, lag_index
from .logistic import LogisticRegressionModel, sigmoid


class SingularDesignError(ValueError):
    """Raised for an exactly singular unregularized design; names the columns."""

    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"singular design matrix; dependent columns: {self.columns}")


class CommonClassModel:
    """Predict the training majority label; confidence = positive share.

    Thresholding the confidence at 0.5 reproduces the majority label,
    including the tie rule (an exact 50/50 split predicts 1).
    """

    def __init__(self):
        self.positive_share_: float | None = None

    def fit(self, y) -> "CommonClassModel":
        y = np.asarray(y, dtype=np.float64)
        if y.size == 0:
            raise ValueError("empty training labels")
        self.positive_share_ = float(y.mean())
        return self

    @property
    def majority_label_(self) -> int:
        return 1 if self.positive_share_ >= 0.5 else 0

    def predict_proba(self, n: int) -> np.ndarray:
        if self.positive_share_ is None:
            raise ValueError("model is not fitted")
        return np.full(n, self.positive_share_, dtype=np.float64)


FEATURE_SETS = ("same", "all")
LINKS = ("linear", "logistic")


def ar_feature_names(metric: str, feature_set: str) -> list[str]:
    if feature_set == "same":
        return [f"{metric}_lag{j}" for j in (1, 2, 3)]
    return [f"{m}_lag{j}" for m, j in LAG_ORDER]


def ar_design(examples: list[LabeledExample], feature_set: str) -> tuple[np.ndarray, np.ndarray]:
    """Design matrix of lagged labels for one metric's examples."""
    if feature_set not in FEATURE_SETS:
        raise ValueError(f"unknown feature set: {feature_set!r}")
    if not examples:
        raise ValueError("no examples")
    metric = examples[0].metric
    rows = []
    y = []
    for ex in examples:
        if ex.metric != metric:
            raise ValueError("examples mix metrics")
        if ex.lags is None:
            raise ValueError("example lacks lag features")
        if feature_set == "same":
            i = lag_index(ex.metric, 1)
            rows.append(ex.lags[i:i + 3])
        else:
            rows.append(ex.lags)
        y.append(ex.label)
    return np.asarray(rows, dtype=np.float64), np.asarray(y, dtype=np.float64)


def _dependent_columns(Xa: np.ndarray) -> list[int]:
    _, s, vt = np.linalg.svd(Xa, full_matrices=False)
    cutoff = s[0] * 1e-10 if s.size else 0.0
    null_rows = vt[s <= cutoff]
    cols = set()
    for row in null_rows:
        cols.update(int(i) for i in np.nonzero(np.abs(row) > 1e-8)[0])
    return sorted(cols)


@dataclass
class ARModelFit:
    link: str
    feature_set: str
    metric: str
    intercept: float
    coefficients: np.ndarray
    residual_variance: float
    feature_names: list

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        z = self.intercept + X @ self.coefficients
        if self.link == "linear":
            return np.clip(z, 0.0, 1.0)
        return sigmoid(z)


def fit_linear_ar(X: np.ndarray, y: np.ndarray, ridge: float = 1e-8) -> tuple[float, np.ndarray, float]:
    """Least squares on [1 | X]; the ridge touches only the slope diagonal.

    With the default tiny ridge a constant target still lands exactly on
    (intercept = mean, slopes = 0). ``ridge=0`` demands full column rank
    and raises SingularDesignError naming the dependent columns.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    Xa = np.hstack([np.ones((n, 1)), X])
    G = Xa.T @ Xa
    if ridge:
        G[np.arange(1, d + 1), np.arange(1, d + 1)] += ridge
    elif np.linalg.matrix_rank(Xa) < d + 1:
        raise SingularDesignError(_dependent_columns(Xa))
    beta = np.linalg.solve(G, Xa.T @ y)
    resid = y - Xa @ beta
    return float(beta[0]), beta[1:], float(np.mean(resid**2))


def fit_ar(examples: list[LabeledExample], link: str = "linear",
           feature_set: str = "same", ridge: float = 1e-8) -> ARModelFit:
    if link not in LINKS:
        raise ValueError(f"unknown link: {link!r}")
    X, y = ar_design(examples, feature_set)
    metric = examples[0].metric
    names = ar_feature_names(metric, feature_set)
    if link == "linear":
        intercept, coef, rvar = fit_linear_ar(X, y, ridge=ridge)
    else:
        if np.unique(y).size < 2:
            # Degenerate target: smoothed constant log-odds, zero slopes.
            share = (float(y.sum()) + 0.5) / (y.size + 1.0)
            intercept = float(np.log(share / (1.0 - share)))
            coef = np.zeros(X.shape[1])
            rvar = float(np.mean((y - share) ** 2))
        else:
            lr = LogisticRegressionModel(l2=0.0, tol=1e-8, max_iter=200).fit(X, y)
            intercept, coef = lr.intercept_, lr.coef_.copy()
            rvar = float(np.mean((y - lr.predict_proba(X)) ** 2))
    return ARModelFit(link=link, feature_set=feature_set, metric=metric,
                      intercept=intercept, coefficients=coef,
                      residual_variance=rvar, feature_names=names)
