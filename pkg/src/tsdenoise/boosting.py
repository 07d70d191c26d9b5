"""Gradient-boosted shallow trees for binary classification, in plain numpy.

Histogram-based: features are quantile-binned once, split search scans bin
boundaries with second-order (gradient/hessian) statistics, leaf values are
Newton steps with L2 regularization, rounds are shrunk by the learning rate.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .exceptions import BadParams, ShapeMismatch, SingleClass
from .validation import as_float_matrix


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _log_loss(logits: np.ndarray, y: np.ndarray) -> float:
    signs = 2.0 * y - 1.0
    return float(np.mean(np.logaddexp(0.0, -signs * logits)))


class _TreeBuilder:
    """Grows one depth-limited tree on binned features with (g, h) stats."""

    def __init__(self, codes: np.ndarray, bin_edges: list, g: np.ndarray, h: np.ndarray,
                 max_depth: int, reg_lambda: float, min_child_weight: float):
        self.codes = codes
        self.bin_edges = bin_edges
        self.g = g
        self.h = h
        self.max_depth = max_depth
        self.reg_lambda = reg_lambda
        self.min_child_weight = min_child_weight
        self.n_features = codes.shape[1]
        self.n_bins = max(len(e) for e in bin_edges) + 1
        self.offsets = np.arange(self.n_features, dtype=np.int64) * self.n_bins

    def _leaf(self, idx: np.ndarray) -> dict:
        g_sum = float(self.g[idx].sum())
        h_sum = float(self.h[idx].sum())
        return {"leaf": -g_sum / (h_sum + self.reg_lambda)}

    def _best_split(self, idx: np.ndarray):
        flat = (self.codes[idx].astype(np.int64) + self.offsets[None, :]).ravel()
        size = self.n_features * self.n_bins
        g_hist = np.bincount(flat, weights=np.repeat(self.g[idx], self.n_features), minlength=size)
        h_hist = np.bincount(flat, weights=np.repeat(self.h[idx], self.n_features), minlength=size)
        g_hist = g_hist.reshape(self.n_features, self.n_bins)
        h_hist = h_hist.reshape(self.n_features, self.n_bins)
        g_total = float(self.g[idx].sum())
        h_total = float(self.h[idx].sum())

        g_left = np.cumsum(g_hist, axis=1)[:, :-1]
        h_left = np.cumsum(h_hist, axis=1)[:, :-1]
        g_right = g_total - g_left
        h_right = h_total - h_left
        lam = self.reg_lambda
        parent = g_total * g_total / (h_total + lam)
        gain = g_left ** 2 / (h_left + lam) + g_right ** 2 / (h_right + lam) - parent
        ok = (h_left >= self.min_child_weight) & (h_right >= self.min_child_weight)
        # a feature's usable cut points stop at len(edges)-1
        for j in range(self.n_features):
            ok[j, len(self.bin_edges[j]):] = False
        gain = np.where(ok, gain, -np.inf)
        j, b = np.unravel_index(int(np.argmax(gain)), gain.shape)
        if not np.isfinite(gain[j, b]) or gain[j, b] <= 0.0:
            return None
        return int(j), int(b)

    def build(self, idx: np.ndarray, depth: int = 0) -> dict:
        if depth >= self.max_depth or len(idx) < 2:
            return self._leaf(idx)
        split = self._best_split(idx)
        if split is None:
            return self._leaf(idx)
        j, b = split
        go_left = self.codes[idx, j] <= b
        left_idx = idx[go_left]
        right_idx = idx[~go_left]
        if len(left_idx) == 0 or len(right_idx) == 0:
            return self._leaf(idx)
        return {
            "feature": j,
            "bin": b,
            "threshold": float(self.bin_edges[j][b]),
            "left": self.build(left_idx, depth + 1),
            "right": self.build(right_idx, depth + 1),
        }


def _eval_tree_codes(node: dict, codes: np.ndarray, out: np.ndarray, mask: np.ndarray) -> None:
    if "leaf" in node:
        out[mask] = node["leaf"]
        return
    go_left = codes[:, node["feature"]] <= node["bin"]
    _eval_tree_codes(node["left"], codes, out, mask & go_left)
    _eval_tree_codes(node["right"], codes, out, mask & ~go_left)


def _eval_tree_raw(node: dict, x: np.ndarray, out: np.ndarray, mask: np.ndarray) -> None:
    if "leaf" in node:
        out[mask] = node["leaf"]
        return
    go_left = x[:, node["feature"]] <= node["threshold"]
    _eval_tree_raw(node["left"], x, out, mask & go_left)
    _eval_tree_raw(node["right"], x, out, mask & ~go_left)


class BoostedTreesClassifier(BaseEstimator, ClassifierMixin):
    """Binary gradient-boosted trees with the sklearn estimator interface.

    subsample < 1 bags rows per round from random_state, which is what makes
    multi-seed protocol averaging non-degenerate; subsample=1.0 is fully
    deterministic regardless of seed.
    """

    def __init__(self, n_rounds: int = 200, max_depth: int = 3, learning_rate: float = 0.1,
                 reg_lambda: float = 1.0, min_child_weight: float = 1e-3,
                 subsample: float = 1.0, max_bins: int = 64, random_state: int = 0):
        self.n_rounds = n_rounds
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.reg_lambda = reg_lambda
        self.min_child_weight = min_child_weight
        self.subsample = subsample
        self.max_bins = max_bins
        self.random_state = random_state

    def _validate_params(self) -> None:
        if self.n_rounds < 1 or self.max_depth < 1 or self.max_bins < 2:
            raise BadParams("n_rounds, max_depth must be >= 1 and max_bins >= 2")
        if not 0 < self.learning_rate <= 1:
            raise BadParams(f"learning_rate must lie in (0, 1], got {self.learning_rate}")
        if not 0 < self.subsample <= 1:
            raise BadParams(f"subsample must lie in (0, 1], got {self.subsample}")
        if self.reg_lambda < 0 or self.min_child_weight < 0:
            raise BadParams("reg_lambda and min_child_weight must be >= 0")

    def fit(self, X, y) -> "BoostedTreesClassifier":
        self._validate_params()
        x = as_float_matrix(X, "X")
        y = np.asarray(y)
        if y.shape != (x.shape[0],):
            raise ShapeMismatch(f"y has shape {y.shape}, expected ({x.shape[0]},)")
        if not np.all(np.isin(y, (0, 1))):
            raise BadParams("y must contain only 0 and 1")
        y = y.astype(np.float64)
        classes = np.unique(y)
        if len(classes) < 2:
            raise SingleClass("training labels contain a single class")

        rng = np.random.default_rng(self.random_state)
        n = x.shape[0]
        edges: list = []
        for j in range(x.shape[1]):
            qs = np.quantile(x[:, j], np.linspace(0, 1, self.max_bins + 1)[1:-1])
            edges.append(np.unique(qs))
        codes = np.empty(x.shape, dtype=np.int32)
        for j, e in enumerate(edges):
            codes[:, j] = np.searchsorted(e, x[:, j], side="left")

        prior = float(np.clip(y.mean(), 1e-6, 1 - 1e-6))
        base = float(np.log(prior / (1.0 - prior)))
        logits = np.full(n, base)
        trees: list[dict] = []
        losses: list[float] = [_log_loss(logits, y)]
        for _ in range(self.n_rounds):
            p = _sigmoid(logits)
            g = p - y
            h = np.maximum(p * (1.0 - p), 1e-16)
            if self.subsample < 1.0:
                rows = np.nonzero(rng.random(n) < self.subsample)[0]
                if len(rows) == 0:
                    rows = np.arange(n)
            else:
                rows = np.arange(n)
            builder = _TreeBuilder(codes, edges, g, h, self.max_depth,
                                   self.reg_lambda, self.min_child_weight)
            tree = builder.build(rows)
            update = np.empty(n)
            _eval_tree_codes(tree, codes, update, np.ones(n, dtype=bool))
            logits = logits + self.learning_rate * update
            trees.append(tree)
            losses.append(_log_loss(logits, y))

        self.classes_ = np.array([0, 1])
        self.n_features_in_ = x.shape[1]
        self.base_score_ = base
        self.trees_ = trees
        self.train_loss_curve_ = losses
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "trees_"):
            raise NotFittedError("this BoostedTreesClassifier is not fitted; call fit first")

    def decision_function(self, X) -> np.ndarray:
        self._check_fitted()
        x = as_float_matrix(X, "X", width=self.n_features_in_)
        logits = np.full(x.shape[0], self.base_score_)
        update = np.empty(x.shape[0])
        for tree in self.trees_:
            _eval_tree_raw(tree, x, update, np.ones(x.shape[0], dtype=bool))
            logits += self.learning_rate * update
        return logits

    def predict_proba(self, X) -> np.ndarray:
        p1 = _sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) > 0.0).astype(np.int64)
