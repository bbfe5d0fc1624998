"""Clustering instability under resampling and under imputation uncertainty.

For one complete dataset, instability is estimated from C bootstrap pairs:
both resamples are clustered, the original rows are classified into each
fitted partition's Voronoi cells, and the two induced partitions are
compared by normalized disagreement; the average over pairs is the
within-sample instability.

For M completed copies of an incomplete dataset, the within instabilities
average to ``u_bar``, the pairwise disagreements between the M fitted
partitions average (over all M**2 ordered pairs) to the between
instability ``b``, and the total is ``t = u_bar + b`` exactly.  ``t`` lies
in [0, 2]; it is 0 when k = 1 or when the clustering is constant.

To make the decomposition exact in the no-missing-data limit, every copy
reuses the same derived random stream: identical copies then produce
identical partitions (``b == 0``) and ``t`` equals the plain bootstrap
instability of the single dataset, bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import clone

from ._rng import derive_rng, derive_seed, resolve_seed
from .datasets import ImputationStack, as_matrix
from .partition import _disagreement_from_labels

__all__ = [
    "BootstrapConfig",
    "InstabilityReport",
    "bootstrap_instability",
    "between_instability",
    "pooled_instability",
]


@dataclass(frozen=True)
class BootstrapConfig:
    """Number of bootstrap pairs and the seed feeding them.

    20 pairs are enough for a stable estimate; 50 tightens it slightly.
    """

    c_pairs: int = 20
    random_state: int | None = None
    max_redraws: int = 10

    def __post_init__(self):
        if self.c_pairs < 1:
            raise ValueError("c_pairs must be >= 1")
        if self.max_redraws < 0:
            raise ValueError("max_redraws must be >= 0")


@dataclass(frozen=True)
class InstabilityReport:
    """Within (u_bar), between (b) and total (t) instability, with detail.

    ``t == u_bar + b`` holds bit-exactly; ``pairwise_delta`` is the M x M
    matrix of disagreements between the per-copy partitions (zero
    diagonal, symmetric).
    """

    u_bar: float
    b: float
    t: float
    u_per_imputation: tuple[float, ...]
    pairwise_delta: np.ndarray

    def __post_init__(self):
        delta = np.asarray(self.pairwise_delta, dtype=np.float64)
        if self.t != self.u_bar + self.b:
            raise ValueError("t must equal u_bar + b exactly")
        if not (0.0 <= self.u_bar and 0.0 <= self.b and self.t <= 2.0):
            raise ValueError("instabilities must satisfy 0 <= u_bar, 0 <= b, t <= 2")
        if delta.ndim != 2 or delta.shape[0] != delta.shape[1]:
            raise ValueError("pairwise_delta must be square")
        if np.diag(delta).any() or not np.array_equal(delta, delta.T):
            raise ValueError("pairwise_delta must be symmetric with zero diagonal")
        delta = delta.copy()
        delta.flags.writeable = False
        object.__setattr__(self, "pairwise_delta", delta)
        object.__setattr__(self, "u_per_imputation", tuple(float(u) for u in self.u_per_imputation))

    @property
    def m(self) -> int:
        return self.pairwise_delta.shape[0]

    @property
    def b_over_t(self) -> float:
        return self.b / self.t if self.t > 0 else 0.0

    def to_json(self) -> dict:
        return {
            "u_bar": self.u_bar,
            "b": self.b,
            "t": self.t,
            "b_over_t": self.b_over_t,
            "m": self.m,
            "u_per_imputation": list(self.u_per_imputation),
            "pairwise_delta": [[float(x) for x in row] for row in self.pairwise_delta],
        }


def _clusterer_k(clusterer) -> int:
    params = clusterer.get_params() if hasattr(clusterer, "get_params") else {}
    return int(params.get("n_clusters", 1))


def _fitted_clone(clusterer, X, seed: int):
    est = clone(clusterer)
    if "random_state" in est.get_params():
        est.set_params(random_state=seed)
    return est.fit(X)


def _mean_exact(values: list[float]) -> float:
    # mean of identical values must be that value, so the decomposition is
    # exact when all copies coincide (no-missing-data limit)
    if all(v == values[0] for v in values):
        return values[0]
    return math.fsum(values) / len(values)


def bootstrap_instability(data, clusterer, config: BootstrapConfig | None = None) -> float:
    """Average disagreement between partitions fit on paired bootstrap resamples.

    For each of ``config.c_pairs`` pairs, two resamples of the rows are
    drawn with replacement, the clusterer is refit on each, all original
    rows are classified by both fitted models, and the normalized
    disagreement of the two induced partitions is recorded.  A resample
    with fewer distinct rows than clusters is redrawn (up to
    ``max_redraws`` times).  Deterministic given the config seed; each
    pair uses its own derived stream.
    """
    if config is None:
        config = BootstrapConfig()
    X = as_matrix(data)
    n = X.shape[0]
    k = _clusterer_k(clusterer)
    seed = resolve_seed(config.random_state)
    deltas = []
    for c in range(config.c_pairs):
        rng = derive_rng(seed, "pair", c)
        resamples = []
        for side in (0, 1):
            for attempt in range(config.max_redraws + 1):
                idx = rng.integers(0, n, size=n)
                if len(np.unique(X[idx], axis=0)) >= k:
                    resamples.append(idx)
                    break
            else:
                raise RuntimeError(
                    f"bootstrap pair {c}: could not draw a resample with {k} distinct rows"
                )
        try:
            fit_a = _fitted_clone(clusterer, X[resamples[0]], derive_seed(seed, "fit", c, 0))
            fit_b = _fitted_clone(clusterer, X[resamples[1]], derive_seed(seed, "fit", c, 1))
            labels_a = np.asarray(fit_a.predict(X))
            labels_b = np.asarray(fit_b.predict(X))
        except Exception as exc:
            raise RuntimeError(f"clustering failed on bootstrap pair {c}: {exc}") from exc
        deltas.append(_disagreement_from_labels(labels_a, labels_b))
    return _mean_exact(deltas)


def between_instability(partitions) -> tuple[float, np.ndarray]:
    """Average disagreement over all ordered pairs of the M partitions.

    The average runs over all M**2 ordered pairs including the zero
    diagonal, so no small-M correction applies.  Returns the scalar and
    the M x M pairwise matrix.  Exactly invariant to reordering the
    partitions (exact summation).
    """
    partitions = list(partitions)
    m = len(partitions)
    if m < 1:
        raise ValueError("between_instability requires at least one partition")
    n = partitions[0].n
    if any(p.n != n for p in partitions):
        raise ValueError("all partitions must cover the same individuals")
    delta = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            delta[i, j] = delta[j, i] = _disagreement_from_labels(
                partitions[i].labels, partitions[j].labels
            )
    b = math.fsum(delta.ravel().tolist()) / (m * m)
    return b, delta


def pooled_instability(stack: ImputationStack, clusterer,
                       config: BootstrapConfig | None = None) -> InstabilityReport:
    """Within/between/total instability decomposition over an imputation stack.

    Every copy runs with the same derived seed (common random numbers), so
    the M work items are order-independent and the decomposition collapses
    exactly to the single-dataset bootstrap instability when the copies
    are identical.
    """
    if config is None:
        config = BootstrapConfig()
    seed = resolve_seed(config.random_state)
    copy_seed = derive_seed(seed, "per-copy")
    fit_seed = derive_seed(seed, "copy-fit")
    copy_config = BootstrapConfig(config.c_pairs, copy_seed, config.max_redraws)
    partitions = []
    u_values = []
    for copy in stack.completed:
        fitted = _fitted_clone(clusterer, copy.rows, fit_seed)
        partitions.append(fitted.partition_)
        u_values.append(bootstrap_instability(copy.rows, clusterer, copy_config))
    b, delta = between_instability(partitions)
    u_bar = _mean_exact(u_values)
    return InstabilityReport(u_bar, b, u_bar + b, tuple(u_values), delta)
