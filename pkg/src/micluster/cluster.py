"""Base clustering estimators and Voronoi-cell classification.

Two sklearn-style estimators:

* :class:`StandardizedKMeans` -- Lloyd's algorithm on z-scored columns,
  best of ``n_init`` seeded random initializations by within-cluster sum
  of squares.  All initializations run batched in one set of array ops.
* :class:`FlexibleUPGMA` -- agglomerative clustering under the
  beta-flexible generalization of average linkage (Lance-Williams
  updates with size-proportional weights), cut at ``n_clusters``.

Both store a :class:`CentroidModel` so new points (or the original points
after a bootstrap refit) can be classified into the fitted partition's
Voronoi cells by nearest centroid.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._rng import check_rng
from .datasets import as_matrix
from .partition import Partition

__all__ = ["CentroidModel", "StandardizedKMeans", "FlexibleUPGMA", "classify"]


@dataclass(frozen=True)
class CentroidModel:
    """Fitted centroids plus the column scaling in effect when they were fit.

    ``centroids`` live in the scaled space; ``classify`` re-applies the same
    scaling so Voronoi cells stay consistent.  Columns with zero variance at
    fit time are excluded from distances (``used`` is False there).
    """

    centroids: np.ndarray
    mean: np.ndarray
    scale: np.ndarray
    used: np.ndarray

    def __post_init__(self):
        centroids = np.asarray(self.centroids, dtype=np.float64)
        mean = np.asarray(self.mean, dtype=np.float64)
        scale = np.asarray(self.scale, dtype=np.float64)
        used = np.asarray(self.used, dtype=bool)
        if centroids.ndim != 2 or centroids.shape[0] < 1:
            raise ValueError("centroids must be a k x p matrix with k >= 1")
        if not (mean.shape == scale.shape == used.shape == (centroids.shape[1],)):
            raise ValueError("scaling vectors must match the centroid dimension")
        if (scale[used] <= 0).any():
            raise ValueError("scale must be positive on every used column")
        if not used.any():
            raise ValueError("at least one column must be usable for distances")
        for name, arr in (("centroids", centroids), ("mean", mean), ("scale", scale), ("used", used)):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def p(self) -> int:
        return self.centroids.shape[1]


def _scaling(X: np.ndarray, standardize: bool):
    p = X.shape[1]
    if not standardize:
        return np.zeros(p), np.ones(p), np.ones(p, dtype=bool)
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    used = scale > 0.0
    safe = np.where(used, scale, 1.0)
    return mean, safe, used


def _apply_scaling(X: np.ndarray, model: CentroidModel) -> np.ndarray:
    return ((X - model.mean) / model.scale)[:, model.used]


def classify(model: CentroidModel, data) -> np.ndarray:
    """Assign each row to the nearest centroid (ties: lowest cluster index)."""
    X = check_array(as_matrix(data), dtype=np.float64)
    if X.shape[1] != model.p:
        raise ValueError(f"expected {model.p} columns, got {X.shape[1]}")
    Xs = _apply_scaling(X, model)
    C = model.centroids[:, model.used]
    d2 = ((Xs[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)
    return d2.argmin(axis=1)


def _lloyd_batched(X: np.ndarray, k: int, n_init: int, max_iter: int, rng: np.random.Generator):
    """Run ``n_init`` Lloyd iterations simultaneously; return the best run.

    The within-cluster sum of squares is checked to be non-increasing at
    every iteration of every run.  A cluster left empty by an update is
    re-seeded with the point farthest from its assigned centroid, which
    keeps k constant without breaking monotonicity (the re-seeded centroid
    had no assigned points).
    """
    n = X.shape[0]
    starts = np.stack([rng.choice(n, size=k, replace=False) for _ in range(n_init)])
    C = X[starts]  # (R, k, p)
    labels = np.full((n_init, n), -1, dtype=np.int64)
    prev_wcss = np.full(n_init, np.inf)
    wcss = prev_wcss
    for _ in range(max_iter):
        d2 = ((X[None, :, None, :] - C[:, None, :, :]) ** 2).sum(axis=3)  # (R, n, k)
        new_labels = d2.argmin(axis=2)
        assigned_d2 = np.take_along_axis(d2, new_labels[:, :, None], axis=2)[:, :, 0]
        wcss = assigned_d2.sum(axis=1)
        if (wcss > prev_wcss * (1 + 1e-9) + 1e-12).any():
            raise RuntimeError("k-means objective increased; numerical failure")
        if (new_labels == labels).all():
            break
        labels = new_labels
        prev_wcss = wcss
        onehot = np.zeros((n_init, n, k))
        np.put_along_axis(onehot, labels[:, :, None], 1.0, axis=2)
        counts = onehot.sum(axis=1)  # (R, k)
        sums = np.einsum("rnk,np->rkp", onehot, X)
        nonempty = counts > 0
        C = np.where(nonempty[:, :, None], sums / np.where(nonempty, counts, 1.0)[:, :, None], C)
        empties = np.argwhere(~nonempty)
        if empties.size:
            order = np.argsort(assigned_d2, axis=1)[:, ::-1]  # farthest points first
            next_pick = {r: 0 for r in set(empties[:, 0].tolist())}
            for r, c in empties:
                C[r, c] = X[order[r, next_pick[r]]]
                next_pick[r] += 1
    best = int(np.argmin(wcss))
    return labels[best], C[best], float(wcss[best])


class StandardizedKMeans(BaseEstimator, ClusterMixin):
    """K-means on z-scored columns with multiple seeded initializations.

    Parameters
    ----------
    n_clusters : int
        Number of clusters (empty clusters are repaired during fitting).
    n_init : int
        Number of random initializations; the run with the lowest
        within-cluster sum of squares on the standardized data wins.
    max_iter : int
        Cap on Lloyd iterations per run.
    standardize : bool
        Z-score columns before clustering (zero-variance columns are
        dropped from distances with a warning).
    random_state : int, Generator or None
        Seeds the initializations; a given int makes fits reproducible.

    Attributes
    ----------
    labels_ : ndarray of shape (n,)
    partition_ : Partition
    model_ : CentroidModel
    inertia_ : float
        Best within-cluster sum of squares.
    dropped_columns_ : tuple of int
        Indices of zero-variance columns excluded from distances.
    """

    def __init__(self, n_clusters=2, n_init=100, max_iter=300, standardize=True, random_state=None):
        self.n_clusters = n_clusters
        self.n_init = n_init
        self.max_iter = max_iter
        self.standardize = standardize
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(as_matrix(X), dtype=np.float64)
        n, p = X.shape
        k = int(self.n_clusters)
        if k < 1:
            raise ValueError("n_clusters must be >= 1")
        if k > n:
            raise ValueError(f"n_clusters={k} exceeds the number of rows ({n})")
        if self.n_init < 1:
            raise ValueError("n_init must be >= 1")
        mean, scale, used = _scaling(X, self.standardize)
        dropped = tuple(int(j) for j in np.flatnonzero(~used))
        if dropped:
            warnings.warn(f"zero-variance columns dropped from distances: {dropped}")
        Xs = ((X - mean) / scale)[:, used]
        rng = check_rng(self.random_state)
        if k == 1:
            labels = np.zeros(n, dtype=np.int64)
            centroids_used = Xs.mean(axis=0, keepdims=True)
            inertia = float(((Xs - centroids_used) ** 2).sum())
        else:
            labels, centroids_used, inertia = _lloyd_batched(Xs, k, int(self.n_init), int(self.max_iter), rng)
        centroids = np.zeros((k, p))
        centroids[:, used] = centroids_used
        self.n_features_in_ = p
        self.labels_ = labels
        self.partition_ = Partition(labels, k)
        self.model_ = CentroidModel(centroids, mean, scale, used)
        self.inertia_ = inertia
        self.dropped_columns_ = dropped
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return classify(self.model_, X)


def _flexible_upgma_merge(D: np.ndarray, n_clusters: int, beta: float):
    """Agglomerate with the size-weighted beta-flexible Lance-Williams update.

    Update for the dissimilarity between merged cluster (i u j) and any k:
    ``(1-beta) * (s_i*d_ik + s_j*d_jk) / (s_i+s_j) + beta * d_ij``.
    With beta = 0 this is exactly average linkage.  Merge heights are
    checked to be monotone non-decreasing when beta <= 0.
    """
    n = D.shape[0]
    D = D.copy()
    np.fill_diagonal(D, np.inf)
    active = list(range(n))
    members = {i: [i] for i in range(n)}
    sizes = {i: 1 for i in range(n)}
    heights = []
    last = -np.inf
    while len(active) > n_clusters:
        sub = D[np.ix_(active, active)]
        flat = int(np.argmin(sub))
        ai, aj = divmod(flat, len(active))
        if ai > aj:
            ai, aj = aj, ai
        i, j = active[ai], active[aj]
        h = float(D[i, j])
        if beta <= 0 and h < last - 1e-9 * max(1.0, abs(last)):
            raise RuntimeError("non-monotone merge height in flexible UPGMA")
        heights.append(h)
        last = max(last, h)
        si, sj = sizes[i], sizes[j]
        for k in active:
            if k in (i, j):
                continue
            D[i, k] = D[k, i] = (1.0 - beta) * (si * D[i, k] + sj * D[j, k]) / (si + sj) + beta * h
        members[i] = members[i] + members[j]
        sizes[i] = si + sj
        del members[j], sizes[j]
        active.remove(j)
    labels = np.zeros(n, dtype=np.int64)
    for new_id, cluster in enumerate(sorted(active, key=lambda c: min(members[c]))):
        labels[members[cluster]] = new_id
    return labels, heights


class FlexibleUPGMA(BaseEstimator, ClusterMixin):
    """Hierarchical clustering under the beta-flexible average-linkage scheme.

    Dissimilarity is squared Euclidean distance on the (optionally
    z-scored) columns.  ``beta`` must be < 1; beta = 0 reproduces plain
    average linkage, and small negative values (default -0.1) keep merge
    heights monotone while sharpening clusters.  After cutting at
    ``n_clusters``, cluster centroids are stored so new points can be
    classified by nearest centroid.

    Attributes
    ----------
    labels_ : ndarray of shape (n,)
    partition_ : Partition
    model_ : CentroidModel
    heights_ : tuple of float
        Merge heights in agglomeration order.
    """

    def __init__(self, n_clusters=2, beta=-0.1, standardize=False):
        self.n_clusters = n_clusters
        self.beta = beta
        self.standardize = standardize

    def fit(self, X, y=None):
        X = check_array(as_matrix(X), dtype=np.float64)
        n, p = X.shape
        k = int(self.n_clusters)
        if k < 1:
            raise ValueError("n_clusters must be >= 1")
        if k > n:
            raise ValueError(f"n_clusters={k} exceeds the number of rows ({n})")
        if not self.beta < 1:
            raise ValueError("beta must be < 1")
        mean, scale, used = _scaling(X, self.standardize)
        Xs = ((X - mean) / scale)[:, used]
        sq = (Xs ** 2).sum(axis=1)
        D = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (Xs @ Xs.T), 0.0)
        labels, heights = _flexible_upgma_merge(D, k, float(self.beta))
        centroids = np.zeros((k, p))
        centroids_used = np.zeros((k, int(used.sum())))
        for c in range(k):
            centroids_used[c] = Xs[labels == c].mean(axis=0)
        centroids[:, used] = centroids_used
        self.n_features_in_ = p
        self.labels_ = labels
        self.partition_ = Partition(labels, k)
        self.model_ = CentroidModel(centroids, mean, scale, used)
        self.heights_ = tuple(heights)
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return classify(self.model_, X)
