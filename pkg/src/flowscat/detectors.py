"""Unsupervised anomaly detectors over edge embeddings.

Five detectors share one contract: fit() learns a scoring model on
training rows and freezes a threshold at the (1 - contamination)
quantile of the training scores; predict() flags rows whose score is
strictly greater than that threshold. Scores are oriented so larger
means more anomalous. Everything is deterministic in (data, params,
seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .errors import TooFewRows
from .metrics import confusion, metrics
from .validation import as_float_matrix, check_width

EULER_GAMMA = 0.5772156649015329


def _average_path_normalizer(n: int) -> float:
    """Expected unsuccessful-search path length in a binary search tree."""
    if n <= 1:
        return 0.0
    if n == 2:
        return 1.0
    return 2.0 * (math.log(n - 1.0) + EULER_GAMMA) - 2.0 * (n - 1.0) / n


class _QuantileThresholdDetector(BaseEstimator):
    """Shared fit/score/flag plumbing for all five detector kinds."""

    def fit(self, X, y=None):
        X = as_float_matrix(X)
        self.n_features_in_ = X.shape[1]
        self._fit_model(X)
        scores = self._score(X)
        self.train_scores_ = scores
        n = scores.shape[0]
        k = math.ceil(self.contamination * n)
        order = np.sort(scores)[::-1]
        self.threshold_ = float(order[min(k, n - 1)])
        return self

    def decision_function(self, X):
        X = check_width(as_float_matrix(X), self.n_features_in_)
        return self._score(X)

    def predict(self, X):
        return (self.decision_function(X) > self.threshold_).astype(np.int64)


def _kmeans_pp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """D^2-weighted seeding."""
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(n)]
    d2 = np.sum((X - centroids[0]) ** 2, axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            centroids[i:] = X[rng.integers(n, size=k - i)]
            break
        probs = d2 / total
        centroids[i] = X[np.searchsorted(np.cumsum(probs), rng.random())]
        d2 = np.minimum(d2, np.sum((X - centroids[i]) ** 2, axis=1))
    return centroids


def _lloyd(X: np.ndarray, centroids: np.ndarray, max_iter: int = 100,
           rel_tol: float = 1e-4) -> tuple[np.ndarray, np.ndarray, float]:
    """Standard alternating assignment/update; empty clusters are
    reseeded with the point farthest from its centroid."""
    prev_inertia = np.inf
    for _ in range(max_iter):
        d2 = (
            np.sum(X ** 2, axis=1)[:, None]
            - 2.0 * X @ centroids.T
            + np.sum(centroids ** 2, axis=1)[None, :]
        )
        labels = np.argmin(d2, axis=1)
        inertia = float(np.maximum(d2[np.arange(X.shape[0]), labels], 0.0).sum())
        new_centroids = centroids.copy()
        for c in range(centroids.shape[0]):
            members = labels == c
            if members.any():
                new_centroids[c] = X[members].mean(axis=0)
            else:
                worst = np.argmax(d2[np.arange(X.shape[0]), labels])
                new_centroids[c] = X[worst]
        centroids = new_centroids
        if prev_inertia - inertia <= rel_tol * max(prev_inertia, 1e-300):
            break
        prev_inertia = inertia
    d2 = (
        np.sum(X ** 2, axis=1)[:, None]
        - 2.0 * X @ centroids.T
        + np.sum(centroids ** 2, axis=1)[None, :]
    )
    labels = np.argmin(d2, axis=1)
    inertia = float(np.maximum(d2[np.arange(X.shape[0]), labels], 0.0).sum())
    return centroids, labels, inertia


def _nearest_centroid_distance(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d2 = (
        np.sum(X ** 2, axis=1)[:, None]
        - 2.0 * X @ centroids.T
        + np.sum(centroids ** 2, axis=1)[None, :]
    )
    return np.sqrt(np.maximum(d2.min(axis=1), 0.0))


class KMeansDetector(_QuantileThresholdDetector):
    """Score = Euclidean distance to the nearest cluster centroid."""

    def __init__(self, clusters: int = 8, contamination: float = 0.1, seed: int = 0):
        self.clusters = clusters
        self.contamination = contamination
        self.seed = seed

    def _fit_model(self, X):
        if X.shape[0] < self.clusters:
            raise TooFewRows(f"{X.shape[0]} rows < {self.clusters} clusters")
        rng = np.random.default_rng(self.seed)
        centroids = _kmeans_pp(X, self.clusters, rng)
        self.centroids_, self.labels_, self.inertia_ = _lloyd(X, centroids)

    def _score(self, X):
        return _nearest_centroid_distance(X, self.centroids_)


class PcaDetector(_QuantileThresholdDetector):
    """Score = L2 reconstruction error after projecting onto the top
    principal axes. Zero-variance axes are dropped."""

    def __init__(self, components: int = 10, contamination: float = 0.1, seed: int = 0):
        self.components = components
        self.contamination = contamination
        self.seed = seed

    def _fit_model(self, X):
        if X.shape[0] < 2:
            raise TooFewRows("need at least 2 rows for a principal-axis fit")
        self.mean_ = X.mean(axis=0)
        _, svals, vt = np.linalg.svd(X - self.mean_, full_matrices=False)
        rank = int(np.sum(svals > 1e-12 * max(svals[0], 1e-300)))
        c = min(self.components, rank)
        self.components_ = vt[:c]

    def _score(self, X):
        centered = X - self.mean_
        recon = (centered @ self.components_.T) @ self.components_
        return np.linalg.norm(centered - recon, axis=1)


@dataclass
class _TreeNode:
    feature: int = -1
    split: float = 0.0
    left: int = -1
    right: int = -1
    size: int = 0
    depth: int = 0


def _grow_tree(X: np.ndarray, rng: np.random.Generator, height_limit: int):
    nodes: list[_TreeNode] = []

    def build(idx: np.ndarray, depth: int) -> int:
        node_id = len(nodes)
        nodes.append(_TreeNode(size=idx.shape[0], depth=depth))
        if depth >= height_limit or idx.shape[0] <= 1:
            return node_id
        sub = X[idx]
        lo, hi = sub.min(axis=0), sub.max(axis=0)
        usable = np.flatnonzero(hi > lo)
        if usable.size == 0:
            return node_id
        feature = int(rng.choice(usable))
        split = rng.uniform(lo[feature], hi[feature])
        mask = sub[:, feature] < split
        left = build(idx[mask], depth + 1)
        right = build(idx[~mask], depth + 1)
        nodes[node_id].feature = feature
        nodes[node_id].split = split
        nodes[node_id].left = left
        nodes[node_id].right = right
        return node_id

    build(np.arange(X.shape[0]), 0)
    return nodes


def _tree_path_lengths(nodes: list[_TreeNode], X: np.ndarray) -> np.ndarray:
    out = np.zeros(X.shape[0])

    def walk(node_id: int, idx: np.ndarray):
        node = nodes[node_id]
        if node.feature < 0:
            out[idx] = node.depth + _average_path_normalizer(node.size)
            return
        mask = X[idx, node.feature] < node.split
        if mask.any():
            walk(node.left, idx[mask])
        if (~mask).any():
            walk(node.right, idx[~mask])

    walk(0, np.arange(X.shape[0]))
    return out


class IsolationForestDetector(_QuantileThresholdDetector):
    """Random isolation trees on 256-row subsamples; score is the
    standard 2**(-mean path length / normalizer)."""

    def __init__(self, estimators: int = 100, contamination: float = 0.1,
                 seed: int = 0, subsample: int = 256):
        self.estimators = estimators
        self.contamination = contamination
        self.seed = seed
        self.subsample = subsample

    def _fit_model(self, X):
        n = X.shape[0]
        if n < 2:
            raise TooFewRows("need at least 2 rows to isolate anything")
        psi = min(self.subsample, n)
        height_limit = math.ceil(math.log2(psi))
        self.trees_ = []
        for t in range(self.estimators):
            rng = np.random.default_rng(np.random.SeedSequence((self.seed, t)))
            idx = rng.choice(n, size=psi, replace=False)
            self.trees_.append(_grow_tree(X[idx], rng, height_limit))
        self._c_psi = _average_path_normalizer(psi)

    def _score(self, X):
        paths = np.zeros(X.shape[0])
        for nodes in self.trees_:
            paths += _tree_path_lengths(nodes, X)
        paths /= len(self.trees_)
        return np.power(2.0, -paths / self._c_psi)


class CblofDetector(_QuantileThresholdDetector):
    """Cluster-based outlier factor: points in large clusters score
    their distance to their own centroid; points in small clusters
    score the distance to the nearest large-cluster centroid. Large
    clusters are the size-ordered prefix covering 90% of the data."""

    def __init__(self, clusters: int = 8, contamination: float = 0.1,
                 seed: int = 0, alpha: float = 0.9):
        self.clusters = clusters
        self.contamination = contamination
        self.seed = seed
        self.alpha = alpha

    def _fit_model(self, X):
        if X.shape[0] < self.clusters:
            raise TooFewRows(f"{X.shape[0]} rows < {self.clusters} clusters")
        rng = np.random.default_rng(self.seed)
        centroids = _kmeans_pp(X, self.clusters, rng)
        self.centroids_, labels, self.inertia_ = _lloyd(X, centroids)
        sizes = np.bincount(labels, minlength=self.clusters)
        order = np.argsort(-sizes, kind="stable")
        cum = np.cumsum(sizes[order])
        boundary = int(np.searchsorted(cum, self.alpha * X.shape[0])) + 1
        self.large_clusters_ = np.sort(order[:boundary])

    def _score(self, X):
        d = np.sqrt(np.maximum(
            np.sum(X ** 2, axis=1)[:, None]
            - 2.0 * X @ self.centroids_.T
            + np.sum(self.centroids_ ** 2, axis=1)[None, :], 0.0,
        ))
        own = np.argmin(d, axis=1)
        d_large = d[:, self.large_clusters_].min(axis=1)
        in_large = np.isin(own, self.large_clusters_)
        return np.where(in_large, d[np.arange(X.shape[0]), own], d_large)


class HbosDetector(_QuantileThresholdDetector):
    """Sum over features of the negative log histogram density.

    Equal-width bins over the training range per feature; values
    outside the range, and empty bins, contribute density epsilon.
    Zero-variance features use a single bin of density 1.
    """

    EPS = 1e-12

    def __init__(self, bins: int = 10, contamination: float = 0.1, seed: int = 0):
        self.bins = bins
        self.contamination = contamination
        self.seed = seed

    def _fit_model(self, X):
        if X.shape[0] < 1:
            raise TooFewRows("need at least 1 row to build histograms")
        n, d = X.shape
        self.mins_ = X.min(axis=0)
        self.maxs_ = X.max(axis=0)
        self.widths_ = (self.maxs_ - self.mins_) / self.bins
        self.densities_ = np.empty((d, self.bins))
        for j in range(d):
            if self.widths_[j] <= 0:
                self.densities_[j] = 1.0
                continue
            counts, _ = np.histogram(
                X[:, j], bins=self.bins, range=(self.mins_[j], self.maxs_[j])
            )
            self.densities_[j] = counts / (n * self.widths_[j])

    def _score(self, X):
        n, d = X.shape
        scores = np.zeros(n)
        for j in range(d):
            if self.widths_[j] <= 0:
                density = np.where(X[:, j] == self.mins_[j], 1.0, self.EPS)
            else:
                inside = (X[:, j] >= self.mins_[j]) & (X[:, j] <= self.maxs_[j])
                bin_idx = np.clip(
                    ((X[:, j] - self.mins_[j]) / self.widths_[j]).astype(np.int64),
                    0, self.bins - 1,
                )
                density = np.where(inside, self.densities_[j][bin_idx], self.EPS)
            scores += np.log(1.0 / np.maximum(density, self.EPS))
        return scores


DETECTOR_KINDS = ("kmeans", "pca", "iforest", "cblof", "hbos")

_FACTORIES = {
    "kmeans": lambda hp, c, s: KMeansDetector(clusters=hp, contamination=c, seed=s),
    "pca": lambda hp, c, s: PcaDetector(components=hp, contamination=c, seed=s),
    "iforest": lambda hp, c, s: IsolationForestDetector(estimators=hp,
                                                        contamination=c, seed=s),
    "cblof": lambda hp, c, s: CblofDetector(clusters=hp, contamination=c, seed=s),
    "hbos": lambda hp, c, s: HbosDetector(bins=hp, contamination=c, seed=s),
}

# hyperparameter sweep used when a config does not override the ranges
DEFAULT_GRID = {
    "kmeans": [2, 3, 5, 7, 9, 10],
    "pca": [5, 10, 15, 20, 25, 30],
    "iforest": [20, 50, 100, 150],
    "cblof": [2, 3, 5, 7, 9, 10],
    "hbos": [5, 10, 15, 20, 25, 30],
}
DEFAULT_CONTAMINATIONS = [0.001, 0.01, 0.04, 0.05, 0.1, 0.2]


def make_detector(kind: str, hyperparameter: int, contamination: float,
                  seed: int = 0):
    if kind not in _FACTORIES:
        raise ValueError(f"unknown detector kind {kind!r}")
    return _FACTORIES[kind](hyperparameter, contamination, seed)


@dataclass
class GridCell:
    kind: str
    hyperparameter: int
    contamination: float
    accuracy: float = math.nan
    macro_f1: float = math.nan
    detection_rate: float = math.nan
    status: str = "ok"
    extra: str = ""


def grid_search(
    kind: str,
    train_embeddings: np.ndarray,
    test_embeddings: np.ndarray,
    test_labels: np.ndarray,
    hyper_range=None,
    contamination_range=None,
    seed: int = 0,
) -> tuple[GridCell, list[GridCell]]:
    """Exhaustive sweep over (hyperparameter, contamination).

    Each cell is scored by macro F1 on the evaluation labels; ties
    break on higher detection rate, then smaller hyperparameter, then
    smaller contamination. Failed cells are recorded and skipped. The
    scoring model depends only on the hyperparameter, so it is fitted
    once per hyperparameter value and shared across the contamination
    axis (contamination only moves the threshold).
    """
    hyper_range = list(DEFAULT_GRID[kind] if hyper_range is None else hyper_range)
    contamination_range = list(
        DEFAULT_CONTAMINATIONS if contamination_range is None else contamination_range
    )
    if not hyper_range or not contamination_range:
        raise ValueError("grid ranges must be non-empty")

    test_labels = np.asarray(test_labels)
    cells: list[GridCell] = []
    for hp_index, hp in enumerate(hyper_range):
        base_seed = int(np.random.SeedSequence((seed, hp_index)).generate_state(1)[0])
        model = None
        failure = None
        try:
            model = make_detector(kind, hp, contamination_range[0], base_seed)
            model.fit(train_embeddings)
            test_scores = model.decision_function(test_embeddings)
        except Exception as err:  # cell marked failed, sweep continues
            failure = err
        for c in contamination_range:
            cell = GridCell(kind=kind, hyperparameter=hp, contamination=c)
            if failure is not None:
                cell.status = f"failed: {failure}"
                cells.append(cell)
                continue
            n = model.train_scores_.shape[0]
            k = math.ceil(c * n)
            threshold = float(np.sort(model.train_scores_)[::-1][min(k, n - 1)])
            flags = (test_scores > threshold).astype(np.int64)
            counts = confusion(flags, test_labels)
            cell.accuracy, cell.macro_f1, cell.detection_rate = metrics(counts)
            if hasattr(model, "inertia_"):
                cell.extra = f"inertia={model.inertia_!r}"
            cells.append(cell)

    ok = [c for c in cells if c.status == "ok"]
    if not ok:
        raise TooFewRows(f"every {kind} grid cell failed")
    best = min(
        ok,
        key=lambda c: (-c.macro_f1, -c.detection_rate, c.hyperparameter,
                       c.contamination),
    )
    return best, cells
