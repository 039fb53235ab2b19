"""Random forest of Gini-split trees.

Each tree is grown on a bootstrap sample to purity (or until no valid
split remains), choosing at every node the best midpoint threshold over a
fresh random feature subset. Leaves store the fraction of positive
training rows reaching them; the forest's confidence is the mean leaf
fraction across trees.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class _Node:
    fraction: float
    feature: int = -1
    threshold: float = 0.0
    left: "_Node | None" = None
    right: "_Node | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


def _best_split(X, y, idx, features, min_leaf):
    """Lowest weighted Gini over midpoint cuts; first strict winner kept."""
    n = idx.size
    total_pos = float(y[idx].sum())
    best = None  # (score, feature, threshold)
    for f in features:
        xs = X[idx, f]
        order = np.argsort(xs, kind="stable")
        xs_sorted = xs[order]
        ys_sorted = y[idx][order]
        boundary = xs_sorted[:-1] < xs_sorted[1:]
        if not boundary.any():
            continue
        n_left = np.arange(1, n)
        n_right = n - n_left
        valid = boundary & (n_left >= min_leaf) & (n_right >= min_leaf)
        if not valid.any():
            continue
        pos_left = np.cumsum(ys_sorted)[:-1]
        pos_right = total_pos - pos_left
        with np.errstate(invalid="ignore"):
            gini_left = 1.0 - (pos_left / n_left) ** 2 - ((n_left - pos_left) / n_left) ** 2
            gini_right = 1.0 - (pos_right / n_right) ** 2 - ((n_right - pos_right) / n_right) ** 2
        score = (n_left * gini_left + n_right * gini_right) / n
        score[~valid] = np.inf
        k = int(np.argmin(score))
        if best is None or score[k] < best[0]:
            threshold = (xs_sorted[k] + xs_sorted[k + 1]) / 2.0
            best = (float(score[k]), int(f), threshold)
    return best


def _grow(X, y, idx, rng, n_features, min_leaf, max_depth, depth):
    fraction = float(y[idx].mean())
    node = _Node(fraction=fraction)
    if fraction in (0.0, 1.0) or idx.size < 2 * min_leaf:
        return node
    if max_depth is not None and depth >= max_depth:
        return node
    features = rng.choice(X.shape[1], size=n_features, replace=False)
    best = _best_split(X, y, idx, features, min_leaf)
    if best is None:
        return node
    _, f, threshold = best
    mask = X[idx, f] <= threshold
    node.feature = f
    node.threshold = threshold
    node.left = _grow(X, y, idx[mask], rng, n_features, min_leaf, max_depth, depth + 1)
    node.right = _grow(X, y, idx[~mask], rng, n_features, min_leaf, max_depth, depth + 1)
    return node


class RandomForestModel:
    def __init__(self, n_trees: int = 100, max_features="sqrt", min_leaf: int = 1,
                 max_depth: int | None = None, seed: int = 0):
        self.n_trees = int(n_trees)
        self.max_features = max_features
        self.min_leaf = int(min_leaf)
        self.max_depth = max_depth
        self.seed = seed
        self.trees_: list[_Node] = []

    def _n_features(self, d: int) -> int:
        if self.max_features == "sqrt":
            return max(1, int(math.sqrt(d)))
        m = int(self.max_features)
        if not 1 <= m <= d:
            raise ValueError(f"max_features {m} out of range for {d} features")
        return m

    def fit(self, X: np.ndarray, y: np.ndarray):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValueError("X and y shapes disagree")
        if X.shape[0] == 0:
            raise ValueError("empty training set")
        n, d = X.shape
        m = self._n_features(d)
        root_rng = np.random.default_rng(self.seed)
        tree_seeds = root_rng.integers(0, 2**63 - 1, size=self.n_trees)
        self.trees_ = []
        for ts in tree_seeds:
            rng = np.random.default_rng(ts)
            idx = rng.integers(0, n, size=n)
            self.trees_.append(_grow(X, y, idx, rng, m, self.min_leaf, self.max_depth, 0))
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if not self.trees_:
            raise ValueError("model is not fitted")
        X = np.asarray(X, dtype=np.float64)
        out = np.zeros(X.shape[0], dtype=np.float64)
        for tree in self.trees_:
            for i in range(X.shape[0]):
                node = tree
                while not node.is_leaf:
                    node = node.left if X[i, node.feature] <= node.threshold else node.right
                out[i] += node.fraction
        out /= len(self.trees_)
        return out
