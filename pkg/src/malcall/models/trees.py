"""Depth-limited decision trees, a Gini random forest and logistic gradient boosting.

Split search is exact greedy: candidate thresholds are the midpoints between
consecutive distinct feature values present in the node. Inputs go left when
``x[feature] < threshold``. Gain ties go to the lowest feature index, then the
lowest threshold.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .base import ScoringModel, sigmoid

_TIE = 1e-12


@dataclass
class Tree:
    """Array-encoded binary tree. ``feature[i] == -1`` marks a leaf."""

    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    value: list[float] = field(default_factory=list)

    def add_leaf(self, value: float) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(float(value))
        return len(self.feature) - 1

    def split(self, node: int, feature: int, threshold: float, left: int, right: int) -> None:
        self.feature[node] = int(feature)
        self.threshold[node] = float(threshold)
        self.left[node] = left
        self.right[node] = right

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def internal_nodes(self) -> list[int]:
        return [i for i, f in enumerate(self.feature) if f >= 0]

    def depth_of(self) -> dict[int, int]:
        """Level of every node; the root is level 1."""
        levels = {0: 1}
        stack = [0]
        while stack:
            i = stack.pop()
            if self.feature[i] >= 0:
                for child in (self.left[i], self.right[i]):
                    levels[child] = levels[i] + 1
                    stack.append(child)
        return levels

    def max_depth(self) -> int:
        levels = self.depth_of()
        internal = [levels[i] for i in self.internal_nodes()]
        return max(internal, default=0)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        feature = np.asarray(self.feature)
        threshold = np.asarray(self.threshold)
        left = np.asarray(self.left)
        right = np.asarray(self.right)
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            f = feature[node]
            internal = f >= 0
            if not internal.any():
                return node
            r = rows[internal]
            n = node[internal]
            go_left = X[r, f[internal]] < threshold[n]
            node[r] = np.where(go_left, left[n], right[n])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(self.value)[self.apply(X)]

    def to_dict(self) -> dict:
        return {
            "feature": list(self.feature),
            "threshold": list(self.threshold),
            "left": list(self.left),
            "right": list(self.right),
            "value": list(self.value),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            [int(v) for v in d["feature"]],
            [float(v) for v in d["threshold"]],
            [int(v) for v in d["left"]],
            [int(v) for v in d["right"]],
            [float(v) for v in d["value"]],
        )


class BinnedMatrix:
    """Per-feature distinct values and the bin code of every cell."""

    def __init__(self, X: np.ndarray):
        self.values: list[np.ndarray] = []
        codes = np.empty(X.shape, dtype=np.int64)
        for j in range(X.shape[1]):
            uniq, inv = np.unique(X[:, j], return_inverse=True)
            self.values.append(uniq)
            codes[:, j] = inv
        self.codes = codes


def best_split(binned: BinnedMatrix, rows: np.ndarray, features, stats: np.ndarray, gain_fn):
    """Best ``(gain, feature, threshold)`` over ``features`` for the given node rows.

    ``stats`` holds per-row additive statistics (columns), and ``gain_fn``
    maps cumulative left/right sums, each of shape ``(k, n_stats)``, to gains.
    Returns ``None`` when no split has positive gain.
    """
    best = None
    node_stats = stats[rows]
    total = node_stats.sum(axis=0)
    for j in features:
        values = binned.values[j]
        codes = binned.codes[rows, j]
        n_bins = len(values)
        if n_bins < 2:
            continue
        sums = np.column_stack([np.bincount(codes, weights=node_stats[:, c], minlength=n_bins) for c in range(stats.shape[1])])
        present = np.flatnonzero(np.bincount(codes, minlength=n_bins) > 0)
        if len(present) < 2:
            continue
        left = np.cumsum(sums[present], axis=0)[:-1]
        right = total - left
        gains = gain_fn(left, right, total)
        if gains.size == 0:
            continue
        top = gains.max()
        if not np.isfinite(top) or top <= _TIE:
            continue
        if best is None or top > best[0] + _TIE:
            k = int(np.flatnonzero(gains >= top - _TIE)[0])
            threshold = 0.5 * (values[present[k]] + values[present[k + 1]])
            best = (float(top), int(j), float(threshold))
    return best


def grow_tree(binned, X, stats, leaf_fn, gain_fn, max_depth, feature_sampler=None, rows=None) -> Tree:
    """Grow one tree depth-first (left subtree first) up to ``max_depth`` splits deep."""
    tree = Tree()
    n_features = X.shape[1]
    if rows is None:
        rows = np.arange(X.shape[0])

    def build(node_rows, depth):
        node = tree.add_leaf(leaf_fn(stats[node_rows].sum(axis=0)))
        if depth >= max_depth or len(node_rows) < 2:
            return node
        features = feature_sampler() if feature_sampler is not None else range(n_features)
        found = best_split(binned, node_rows, features, stats, gain_fn)
        if found is None:
            return node
        _, j, threshold = found
        go_left = X[node_rows, j] < threshold
        left = build(node_rows[go_left], depth + 1)
        right = build(node_rows[~go_left], depth + 1)
        tree.split(node, j, threshold, left, right)
        return node

    build(rows, 0)
    return tree


# --- random forest ----------------------------------------------------------


def _gini_gain(left, right, total):
    # stats columns: (weight, positive weight)
    def weighted_impurity(s):
        w = s[..., 0]
        with np.errstate(invalid="ignore", divide="ignore"):
            p = np.where(w > 0, s[..., 1] / np.where(w > 0, w, 1.0), 0.0)
        return w * 2.0 * p * (1.0 - p)

    valid = (left[:, 0] > 0) & (right[:, 0] > 0)
    parent = weighted_impurity(total)
    gain = (parent - weighted_impurity(left) - weighted_impurity(right)) / total[0]
    return np.where(valid, gain, -np.inf)


def _class1_fraction(s):
    return s[1] / s[0] if s[0] > 0 else 0.0


class TreeEnsemble(ScoringModel):
    """Common behaviour of the forest and the boosted model."""

    def _raw(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def tree_scores(self, X) -> np.ndarray:
        """Per-tree outputs, shape ``(n_trees, n_rows)``."""
        X = self._validate(X)
        return np.vstack([t.predict(X) for t in self.trees_]) if self.trees_ else np.zeros((0, len(X)))

    def _state(self):
        return {"trees": [t.to_dict() for t in self.trees_], **self._extra_state()}

    def _extra_state(self) -> dict:
        return {}

    def _load_state(self, state):
        self.trees_ = [Tree.from_dict(d) for d in state["trees"]]


class RandomForest(TreeEnsemble):
    """Bagged Gini trees; the score is the mean of leaf class-1 fractions.

    Each tree sees a bootstrap sample (drawn with replacement, kept as
    per-row multiplicities) and considers ``ceil(sqrt(d))`` random candidate
    features at every split.
    """

    kind = "forest"

    def __init__(self, n_trees=100, max_depth=3, max_features="sqrt", bootstrap=True, random_state=0):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.random_state = random_state

    def _n_candidates(self, d: int) -> int:
        if self.max_features == "sqrt":
            return max(1, int(np.ceil(np.sqrt(d))))
        if self.max_features is None:
            return d
        return max(1, min(d, int(self.max_features)))

    def _fit(self, X, y):
        n, d = X.shape
        rng = np.random.default_rng(self.random_state)
        binned = BinnedMatrix(X)
        k = self._n_candidates(d)

        def sampler():
            return np.sort(rng.choice(d, size=k, replace=False))

        self.trees_ = []
        for _ in range(self.n_trees):
            weight = np.bincount(rng.integers(0, n, size=n), minlength=n).astype(float) if self.bootstrap else np.ones(n)
            rows = np.flatnonzero(weight > 0)
            stats = np.column_stack([weight, weight * y])
            tree = grow_tree(binned, X, stats, _class1_fraction, _gini_gain, self.max_depth, sampler, rows)
            self.trees_.append(tree)

    def _score(self, X):
        if not self.trees_:
            return np.zeros(len(X))
        total = np.zeros(len(X))
        for t in self.trees_:
            total += t.predict(X)
        return total / len(self.trees_)


# --- gradient boosting --------------------------------------------------------


def newton_leaf(g_sum: float, h_sum: float, reg_lambda: float) -> float:
    return -g_sum / (h_sum + reg_lambda)


class GradientBoostedTrees(TreeEnsemble):
    """Boosted regression trees on the logistic loss with second-order gains.

    Split gain is ``(GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)) / 2`` over sums
    of gradients ``G`` and hessians ``H``; leaves hold ``-learning_rate * G / (H + l)``.
    The raw score starts at the log-odds of the training prior and the
    output is its sigmoid.
    """

    kind = "gbt"

    def __init__(self, n_trees=100, max_depth=3, learning_rate=0.1, reg_lambda=1.0, min_child_weight=1.0):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.reg_lambda = reg_lambda
        self.min_child_weight = min_child_weight

    def _gain(self, left, right, total):
        lam = self.reg_lambda

        def term(s):
            return s[..., 0] ** 2 / (s[..., 1] + lam)

        valid = (left[:, 2] > 0) & (right[:, 2] > 0)
        valid &= (left[:, 1] >= self.min_child_weight) & (right[:, 1] >= self.min_child_weight)
        gain = 0.5 * (term(left) + term(right) - term(total))
        return np.where(valid, gain, -np.inf)

    def _fit(self, X, y):
        prior = y.mean()
        self.base_score_ = float(np.log(prior / (1.0 - prior)))
        binned = BinnedMatrix(X)
        raw = np.full(len(y), self.base_score_)
        ones = np.ones(len(y))
        self.trees_ = []
        self.train_loss_ = [_log_loss(raw, y)]
        eta, lam = self.learning_rate, self.reg_lambda

        def leaf(s):
            return eta * newton_leaf(s[0], s[1], lam)

        for _ in range(self.n_trees):
            p = sigmoid(raw)
            stats = np.column_stack([p - y, p * (1.0 - p), ones])
            tree = grow_tree(binned, X, stats, leaf, self._gain, self.max_depth)
            raw += tree.predict(X)
            self.trees_.append(tree)
            self.train_loss_.append(_log_loss(raw, y))

    def raw_score(self, X) -> np.ndarray:
        X = self._validate(X)
        total = np.full(len(X), self.base_score_)
        for t in self.trees_:
            total += t.predict(X)
        return total

    def _score(self, X):
        total = np.full(len(X), self.base_score_)
        for t in self.trees_:
            total += t.predict(X)
        return sigmoid(total)

    def _extra_state(self):
        return {"base_score": self.base_score_}

    def _load_state(self, state):
        super()._load_state(state)
        self.base_score_ = float(state["base_score"])


def _log_loss(raw, y) -> float:
    return float(np.mean(np.logaddexp(0.0, raw) - y * raw))


# --- introspection ----------------------------------------------------------


@dataclass
class FeatureUsage:
    total: Counter
    by_level: dict[int, Counter]

    def named(self, names) -> "FeatureUsage":
        """Re-key counts by ``names[index]``, merging columns that share a name."""
        def rename(c):
            out = Counter()
            for k, v in c.items():
                out[names[k]] += v
            return out

        return FeatureUsage(rename(self.total), {lvl: rename(c) for lvl, c in self.by_level.items()})


def feature_usage_histogram(model, by_level: bool = True) -> FeatureUsage:
    """Count internal-node occurrences of every feature, overall and per level."""
    trees = getattr(model, "trees_", None)
    if trees is None:
        raise TypeError(f"{type(model).__name__} is not a tree model")
    total: Counter = Counter()
    levels: dict[int, Counter] = {}
    for tree in trees:
        depth = tree.depth_of()
        for i in tree.internal_nodes():
            f = tree.feature[i]
            total[f] += 1
            if by_level:
                levels.setdefault(depth[i], Counter())[f] += 1
    return FeatureUsage(total, dict(sorted(levels.items())))


def dump_tree(model, index: int = 0, feature_names=None, precision: int = 6) -> str:
    """Indented text rendering of one tree of an ensemble."""
    trees = getattr(model, "trees_", None)
    if trees is None:
        raise TypeError(f"{type(model).__name__} is not a tree model")
    tree = trees[index]
    lines = [f"tree {index} ({model.kind})"]

    def name(f):
        return feature_names[f] if feature_names is not None else f"x[{f}]"

    def walk(i, indent):
        pad = "  " * indent
        if tree.feature[i] < 0:
            lines.append(f"{pad}leaf value={tree.value[i]:.{precision}g}")
            return
        lines.append(f"{pad}node {i}: {name(tree.feature[i])} < {tree.threshold[i]:.{precision}g}")
        walk(tree.left[i], indent + 1)
        lines.append(f"{pad}node {i}: else")
        walk(tree.right[i], indent + 1)

    walk(0, 1)
    return "\n".join(lines)
