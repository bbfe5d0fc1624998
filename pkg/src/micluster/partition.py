"""Partitions, co-membership matrices, and partition-comparison metrics.

A partition of n individuals is a label vector with values in
``[0, k_max)``; clusters may be empty, so partitions with fewer than
``k_max`` non-empty clusters are representable.  Two partitions are
comparable only when they cover the same n individuals.

The disagreement metrics count ordered pairs (i, i'), including i = i'
(the diagonal always agrees), so the normalized disagreement equals the
Mirkin distance divided by n**2 exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Partition",
    "ConnectivityMatrix",
    "MeanConnectivity",
    "connectivity",
    "mean_connectivity",
    "contingency_table",
    "mirkin_distance",
    "disagreement",
    "adjusted_rand_index",
]


@dataclass(frozen=True)
class Partition:
    """A hard clustering: ``labels[i]`` is the cluster id of individual i.

    Parameters
    ----------
    labels : array-like of int, shape (n,)
        Cluster ids in ``[0, k_max)``.
    k_max : int
        Declared number of clusters; clusters may be empty.
    """

    labels: np.ndarray
    k_max: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1 or labels.size < 1:
            raise ValueError("labels must be a non-empty 1-d sequence")
        k_max = int(self.k_max)
        if k_max < 1:
            raise ValueError("k_max must be >= 1")
        if labels.min() < 0 or labels.max() >= k_max:
            raise ValueError(f"labels must lie in [0, {k_max})")
        labels = labels.copy()
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "k_max", k_max)

    @property
    def n(self) -> int:
        return self.labels.size

    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k_max)

    def same_relation(self, other: "Partition") -> bool:
        """True when both partitions induce the same equivalence relation."""
        return mirkin_distance(self, other) == 0


@dataclass(frozen=True)
class ConnectivityMatrix:
    """Binary co-membership matrix: ``h[i, j] = 1`` iff i and j share a cluster."""

    h: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.h, dtype=np.float64)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValueError("connectivity matrix must be square")
        if not np.array_equal(h, h.T):
            raise ValueError("connectivity matrix must be symmetric")
        if not np.all(np.diag(h) == 1.0):
            raise ValueError("connectivity diagonal must be all ones")
        if not np.isin(h, (0.0, 1.0)).all():
            raise ValueError("connectivity entries must be 0 or 1")
        h = h.copy()
        h.flags.writeable = False
        object.__setattr__(self, "h", h)

    @property
    def n(self) -> int:
        return self.h.shape[0]


@dataclass(frozen=True)
class MeanConnectivity:
    """Entrywise average of connectivity matrices; entries in [0, 1]."""

    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("mean connectivity must be square")
        if not np.allclose(m, m.T):
            raise ValueError("mean connectivity must be symmetric")
        if not np.all(np.diag(m) == 1.0):
            raise ValueError("mean connectivity diagonal must be all ones")
        if m.min() < 0.0 or m.max() > 1.0:
            raise ValueError("mean connectivity entries must lie in [0, 1]")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "m", m)

    @property
    def n(self) -> int:
        return self.m.shape[0]


def _check_comparable(p: Partition, q: Partition) -> None:
    if p.n != q.n:
        raise ValueError(f"partitions cover different numbers of individuals ({p.n} vs {q.n})")


def connectivity(p: Partition) -> ConnectivityMatrix:
    """Co-membership matrix of a partition."""
    labels = p.labels
    return ConnectivityMatrix((labels[:, None] == labels[None, :]).astype(np.float64))


def mean_connectivity(partitions: list[Partition]) -> MeanConnectivity:
    """Entrywise average of the co-membership matrices of ``partitions``.

    Sums of 0/1 entries are exact in float64, so the result does not depend
    on the order of the list.
    """
    if len(partitions) == 0:
        raise ValueError("mean_connectivity requires at least one partition")
    n = partitions[0].n
    total = np.zeros((n, n), dtype=np.float64)
    for p in partitions:
        if p.n != n:
            raise ValueError("all partitions must cover the same individuals")
        labels = p.labels
        total += labels[:, None] == labels[None, :]
    return MeanConnectivity(total / len(partitions))


def contingency_table(p: Partition, q: Partition) -> np.ndarray:
    """Cross-tabulation of cluster memberships, shape (p.k_max, q.k_max)."""
    _check_comparable(p, q)
    table = np.zeros((p.k_max, q.k_max), dtype=np.int64)
    np.add.at(table, (p.labels, q.labels), 1)
    return table


def _pair_counts(a: np.ndarray, b: np.ndarray) -> tuple[int, int, int]:
    """Ordered co-membership pair counts (diagonal included), as python ints.

    Returns (pairs co-member in a, pairs co-member in b, pairs co-member in both).
    """
    ka = int(a.max()) + 1
    kb = int(b.max()) + 1
    table = np.bincount(a * kb + b, minlength=ka * kb).reshape(ka, kb)
    rows = table.sum(axis=1)
    cols = table.sum(axis=0)
    return (
        int(np.dot(rows, rows)),
        int(np.dot(cols, cols)),
        int(np.einsum("ij,ij->", table, table)),
    )


def mirkin_distance(p: Partition, q: Partition) -> int:
    """Number of ordered pairs (i, i') on which p and q disagree about co-membership.

    Always an even integer; zero iff the partitions induce the same
    equivalence relation; invariant to relabeling either argument.
    """
    _check_comparable(p, q)
    in_p, in_q, in_both = _pair_counts(p.labels, q.labels)
    return in_p + in_q - 2 * in_both


def disagreement(p: Partition, q: Partition) -> float:
    """Fraction of ordered pairs with conflicting co-membership: Mirkin / n**2."""
    d = mirkin_distance(p, q)
    return d / (p.n * p.n)


def _mirkin_from_labels(a: np.ndarray, b: np.ndarray) -> int:
    # validation-free fast path for internal use on raw label vectors
    in_a, in_b, in_both = _pair_counts(a, b)
    return in_a + in_b - 2 * in_both


def _disagreement_from_labels(a: np.ndarray, b: np.ndarray) -> float:
    n = a.size
    return _mirkin_from_labels(a, b) / (n * n)


def adjusted_rand_index(p: Partition, q: Partition) -> float:
    """Chance-corrected pair-agreement between two partitions.

    Computed from the contingency table in exact integer arithmetic with a
    single final division, so the result is the correctly rounded value of
    the underlying rational.  Degenerate case (zero denominator, e.g. both
    partitions all singletons): 1.0 when the partitions induce the same
    relation, else 0.0.
    """
    _check_comparable(p, q)
    n = p.n
    if n < 2:
        raise ValueError("adjusted_rand_index requires at least 2 individuals")
    table = contingency_table(p, q)
    rows = table.sum(axis=1)
    cols = table.sum(axis=0)

    def comb2(values) -> int:
        return int(sum(int(v) * (int(v) - 1) // 2 for v in np.ravel(values)))

    index = comb2(table)
    sum_a = comb2(rows)
    sum_b = comb2(cols)
    total = n * (n - 1) // 2
    # ARI = (index - sum_a*sum_b/total) / ((sum_a+sum_b)/2 - sum_a*sum_b/total),
    # cleared of fractions by multiplying through by 2*total.
    numerator = 2 * (index * total - sum_a * sum_b)
    denominator = total * (sum_a + sum_b) - 2 * sum_a * sum_b
    if denominator == 0:
        return 1.0 if mirkin_distance(p, q) == 0 else 0.0
    return numerator / denominator
