"""Traditional supervised classifiers: KNN, decision tree, random forest,
and a linear one-vs-rest SVM.

Every classifier reduces prediction to per-class decision scores plus a
shared argmax that breaks score ties by category name; the same scores feed
ROC computation in the evaluation harness.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError


def argmax_by_score(scores: dict[str, float]) -> str:
    """Highest score wins; exact ties go to the lexicographically
    smallest category name."""
    if not scores:
        raise DataError("no scores to rank")
    return min(scores, key=lambda c: (-scores[c], c))


def _check_features(X: np.ndarray, labels: Sequence[str] | None = None) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DataError("feature matrix must be 2-d")
    if not np.all(np.isfinite(X)):
        raise DataError("non-finite feature value")
    if labels is not None and len(labels) != X.shape[0]:
        raise DataError("labels and feature rows disagree in length")
    return X


def _check_query(query: np.ndarray, dim: int) -> np.ndarray:
    q = np.asarray(query, dtype=np.float64)
    if q.shape != (dim,):
        raise DataError(f"query has shape {q.shape}, expected ({dim},)")
    if not np.all(np.isfinite(q)):
        raise DataError("non-finite query value")
    return q


class KNNClassifier:
    """Majority vote of the k nearest rows by Euclidean distance.

    Vote ties go to the class with the smallest mean distance among its
    voting neighbors, then to the category name. Both rules are encoded in
    the decision score: votes plus a closeness bonus strictly below 1.
    """

    def __init__(self, k: int = 5):
        if k < 1:
            raise DataError("k must be at least 1")
        self.k = k
        self._X: np.ndarray | None = None
        self._labels: list[str] = []
        self.classes: list[str] = []

    def fit(self, X: np.ndarray, labels: Sequence[str]) -> "KNNClassifier":
        X = _check_features(X, labels)
        if X.shape[0] == 0:
            raise DataError("empty training set")
        if self.k > X.shape[0]:
            raise DataError(f"k={self.k} exceeds {X.shape[0]} training rows")
        self._X = X
        self._labels = list(labels)
        self.classes = sorted(set(labels))
        return self

    def decision_scores(self, query: np.ndarray) -> dict[str, float]:
        if self._X is None:
            raise DataError("classifier not fitted")
        q = _check_query(query, self._X.shape[1])
        dists = np.linalg.norm(self._X - q, axis=1)
        nearest = np.argsort(dists, kind="stable")[: self.k]
        scores = {c: 0.0 for c in self.classes}
        for c in self.classes:
            member_dists = [dists[i] for i in nearest if self._labels[i] == c]
            if member_dists:
                mean_dist = sum(member_dists) / len(member_dists)
                scores[c] = len(member_dists) + 0.99 / (1.0 + mean_dist)
        return scores

    def predict(self, query: np.ndarray) -> str:
        return argmax_by_score(self.decision_scores(query))


def knn_predict(
    X: np.ndarray, labels: Sequence[str], query: np.ndarray, k: int = 5
) -> str:
    return KNNClassifier(k=k).fit(X, labels).predict(query)


@dataclass
class TreeNode:
    # Leaf: feature is None and counts holds the class distribution.
    feature: int | None
    threshold: float
    left: "TreeNode | None"
    right: "TreeNode | None"
    counts: np.ndarray

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


@dataclass
class DecisionTree:
    root: TreeNode
    classes: list[str]
    n_features: int


def _gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(1.0 - np.sum(p * p))


def _best_split(X, codes, n_classes, feature_ids, min_leaf):
    """Exhaustive scan: lowest weighted Gini; ties keep the lowest feature
    index, then the lowest threshold."""
    n = X.shape[0]
    best = None
    for f in feature_ids:
        col = X[:, f]
        order = np.argsort(col, kind="stable")
        sorted_col = col[order]
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), codes[order]] = 1.0
        prefix = np.cumsum(onehot, axis=0)
        total = prefix[-1]
        left_n = np.arange(1, n, dtype=np.float64)
        right_n = n - left_n
        left_counts = prefix[:-1]
        right_counts = total - left_counts
        gini_l = 1.0 - np.sum((left_counts / left_n[:, None]) ** 2, axis=1)
        gini_r = 1.0 - np.sum((right_counts / right_n[:, None]) ** 2, axis=1)
        weighted = (left_n * gini_l + right_n * gini_r) / n
        valid = (
            (sorted_col[1:] > sorted_col[:-1])
            & (left_n >= min_leaf)
            & (right_n >= min_leaf)
        )
        if not valid.any():
            continue
        candidates = np.nonzero(valid)[0]
        pos = candidates[np.argmin(weighted[candidates])]
        if best is None or weighted[pos] < best[0]:
            threshold = (sorted_col[pos] + sorted_col[pos + 1]) / 2.0
            best = (float(weighted[pos]), int(f), threshold)
    return best


def _grow(X, codes, n_classes, depth, max_depth, min_leaf, rng, n_subsample):
    counts = np.bincount(codes, minlength=n_classes).astype(np.float64)
    node = TreeNode(feature=None, threshold=0.0, left=None, right=None, counts=counts)
    if (
        _gini(counts) == 0.0
        or (max_depth is not None and depth >= max_depth)
        or X.shape[0] < 2 * min_leaf
    ):
        return node
    if n_subsample is not None:
        feature_ids = np.sort(rng.choice(X.shape[1], size=n_subsample, replace=False))
    else:
        feature_ids = np.arange(X.shape[1])
    split = _best_split(X, codes, n_classes, feature_ids, min_leaf)
    if split is None:
        return node
    _, feature, threshold = split
    mask = X[:, feature] <= threshold
    node.feature = feature
    node.threshold = threshold
    node.left = _grow(
        X[mask], codes[mask], n_classes, depth + 1, max_depth, min_leaf, rng, n_subsample
    )
    node.right = _grow(
        X[~mask], codes[~mask], n_classes, depth + 1, max_depth, min_leaf, rng, n_subsample
    )
    return node


class DecisionTreeClassifier:
    """CART: binary axis-aligned splits chosen by Gini impurity."""

    def __init__(self, max_depth: int | None = None, min_leaf: int = 1):
        if min_leaf < 1:
            raise DataError("min_leaf must be at least 1")
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.tree: DecisionTree | None = None

    def fit(self, X: np.ndarray, labels: Sequence[str]) -> "DecisionTreeClassifier":
        X = _check_features(X, labels)
        if X.shape[0] == 0:
            raise DataError("empty training set")
        classes = sorted(set(labels))
        lookup = {c: i for i, c in enumerate(classes)}
        codes = np.asarray([lookup[l] for l in labels], dtype=np.int64)
        root = _grow(
            X, codes, len(classes), 0, self.max_depth, self.min_leaf, None, None
        )
        self.tree = DecisionTree(root=root, classes=classes, n_features=X.shape[1])
        return self

    def _leaf(self, query: np.ndarray) -> TreeNode:
        if self.tree is None:
            raise DataError("classifier not fitted")
        q = _check_query(query, self.tree.n_features)
        node = self.tree.root
        while not node.is_leaf:
            node = node.left if q[node.feature] <= node.threshold else node.right
        return node

    def decision_scores(self, query: np.ndarray) -> dict[str, float]:
        leaf = self._leaf(query)
        total = leaf.counts.sum()
        return {
            c: float(leaf.counts[i] / total) for i, c in enumerate(self.tree.classes)
        }

    def predict(self, query: np.ndarray) -> str:
        return argmax_by_score(self.decision_scores(query))


def dt_train(
    X: np.ndarray,
    labels: Sequence[str],
    max_depth: int | None = None,
    min_leaf: int = 1,
) -> DecisionTreeClassifier:
    return DecisionTreeClassifier(max_depth=max_depth, min_leaf=min_leaf).fit(X, labels)


def dt_predict(tree: DecisionTreeClassifier, query: np.ndarray) -> str:
    return tree.predict(query)


class RandomForestClassifier:
    """Bagged CART trees with per-split feature subsampling of ceil(sqrt(d))."""

    def __init__(
        self,
        n_trees: int = 200,
        seed: int = 0,
        max_depth: int | None = None,
        min_leaf: int = 1,
    ):
        if n_trees < 1:
            raise DataError("n_trees must be at least 1")
        self.n_trees = n_trees
        self.seed = seed
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.trees: list[DecisionTree] = []
        self.classes: list[str] = []

    def fit(self, X: np.ndarray, labels: Sequence[str]) -> "RandomForestClassifier":
        X = _check_features(X, labels)
        if X.shape[0] == 0:
            raise DataError("empty training set")
        self.classes = sorted(set(labels))
        lookup = {c: i for i, c in enumerate(self.classes)}
        codes = np.asarray([lookup[l] for l in labels], dtype=np.int64)
        n, d = X.shape
        n_subsample = min(d, math.ceil(math.sqrt(d)))
        # Independent per-tree seeds so per-tree work could run in parallel
        # without changing results.
        tree_seeds = np.random.default_rng(self.seed).integers(
            0, 2**63 - 1, size=self.n_trees
        )
        self.trees = []
        for tree_seed in tree_seeds:
            rng = np.random.default_rng(int(tree_seed))
            bootstrap = rng.integers(0, n, size=n)
            root = _grow(
                X[bootstrap],
                codes[bootstrap],
                len(self.classes),
                0,
                self.max_depth,
                self.min_leaf,
                rng,
                n_subsample,
            )
            self.trees.append(
                DecisionTree(root=root, classes=self.classes, n_features=d)
            )
        return self

    def vote_counts(self, query: np.ndarray) -> dict[str, int]:
        if not self.trees:
            raise DataError("classifier not fitted")
        q = _check_query(query, self.trees[0].n_features)
        votes = {c: 0 for c in self.classes}
        for tree in self.trees:
            node = tree.root
            while not node.is_leaf:
                node = node.left if q[node.feature] <= node.threshold else node.right
            best = int(np.argmax(node.counts))
            votes[self.classes[best]] += 1
        return votes

    def decision_scores(self, query: np.ndarray) -> dict[str, float]:
        votes = self.vote_counts(query)
        return {c: votes[c] / self.n_trees for c in self.classes}

    def predict(self, query: np.ndarray) -> str:
        return argmax_by_score(self.decision_scores(query))


def rf_train(
    X: np.ndarray,
    labels: Sequence[str],
    n_trees: int = 200,
    seed: int = 0,
    max_depth: int | None = None,
    min_leaf: int = 1,
) -> RandomForestClassifier:
    return RandomForestClassifier(
        n_trees=n_trees, seed=seed, max_depth=max_depth, min_leaf=min_leaf
    ).fit(X, labels)


def rf_predict(forest: RandomForestClassifier, query: np.ndarray) -> str:
    return forest.predict(query)


class LinearSVMClassifier:
    """One-vs-rest linear SVM trained by batch subgradient descent on
    L2-regularized hinge loss."""

    def __init__(
        self,
        epochs: int = 200,
        learning_rate: float = 0.01,
        reg: float = 1e-3,
    ):
        if epochs < 1:
            raise DataError("epochs must be at least 1")
        if learning_rate <= 0 or reg < 0:
            raise DataError("bad learning_rate or reg")
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.reg = reg
        self.classes: list[str] = []
        self.weights: dict[str, np.ndarray] = {}
        self.biases: dict[str, float] = {}
        self.loss_history: dict[str, list[float]] = {}

    def fit(self, X: np.ndarray, labels: Sequence[str]) -> "LinearSVMClassifier":
        X = _check_features(X, labels)
        self.classes = sorted(set(labels))
        if len(self.classes) < 2:
            raise DataError("SVM training requires at least 2 classes")
        n, d = X.shape
        label_arr = np.asarray(labels, dtype=object)
        for c in self.classes:
            y = np.where(label_arr == c, 1.0, -1.0)
            w = np.zeros(d)
            b = 0.0
            history = []
            for _ in range(self.epochs):
                margins = y * (X @ w + b)
                violating = margins < 1.0
                hinge = np.maximum(0.0, 1.0 - margins)
                history.append(
                    float(self.reg / 2.0 * np.dot(w, w) + hinge.mean())
                )
                grad_w = self.reg * w - (y[violating, None] * X[violating]).sum(
                    axis=0
                ) / n
                grad_b = -y[violating].sum() / n
                w = w - self.learning_rate * grad_w
                b = b - self.learning_rate * grad_b
            self.weights[c] = w
            self.biases[c] = b
            self.loss_history[c] = history
        return self

    def decision_scores(self, query: np.ndarray) -> dict[str, float]:
        if not self.classes:
            raise DataError("classifier not fitted")
        q = _check_query(query, len(next(iter(self.weights.values()))))
        return {
            c: float(self.weights[c] @ q + self.biases[c]) for c in self.classes
        }

    def predict(self, query: np.ndarray) -> str:
        return argmax_by_score(self.decision_scores(query))


def svm_train(
    X: np.ndarray,
    labels: Sequence[str],
    epochs: int = 200,
    learning_rate: float = 0.01,
    reg: float = 1e-3,
) -> LinearSVMClassifier:
    return LinearSVMClassifier(
        epochs=epochs, learning_rate=learning_rate, reg=reg
    ).fit(X, labels)


def svm_predict(svm: LinearSVMClassifier, query: np.ndarray) -> str:
    return svm.predict(query)
