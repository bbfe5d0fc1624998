"""Median-partition consensus: pooling several partitions into one.

The pooled partition minimizes the summed Mirkin distance to the M
contributory partitions,

    L(labels) = sum_m mirkin(labels, labels_m),

over partitions into at most k clusters.  Three solvers:

* :func:`consensus_nmf` -- relax to symmetric nonnegative factorization
  of the mean co-membership matrix, ``min ||Mbar - G G^T||^2`` with
  G >= 0, solved by damped multiplicative updates (monotone by
  construction), then harden G by row-argmax.
* :func:`consensus_saom` -- simulated annealing over single-label moves
  with an O(1) incremental objective evaluation.
* :func:`consensus_exact` -- exhaustive enumeration of restricted growth
  strings, feasible for n <= 10; used as the test oracle.

Restricting the search to the contributory partitions themselves is known
to be within a factor two of the optimum, so both heuristic solvers never
return anything worse than the best contributory partition.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._rng import derive_rng, resolve_seed
from .partition import Partition, mean_connectivity, mirkin_distance

__all__ = [
    "ConsensusProblem",
    "ConsensusResult",
    "AnnealSchedule",
    "consensus_objective",
    "consensus_nmf",
    "consensus_saom",
    "consensus_exact",
    "solve_consensus",
]


@dataclass(frozen=True)
class ConsensusProblem:
    """M contributory partitions over common individuals, and the target k."""

    partitions: tuple[Partition, ...]
    k: int

    def __post_init__(self):
        partitions = tuple(self.partitions)
        if len(partitions) < 1:
            raise ValueError("a consensus problem needs at least one partition")
        n = partitions[0].n
        if any(p.n != n for p in partitions):
            raise ValueError("all contributory partitions must cover the same individuals")
        if int(self.k) < 1:
            raise ValueError("k must be >= 1")
        object.__setattr__(self, "partitions", partitions)
        object.__setattr__(self, "k", int(self.k))

    @property
    def m(self) -> int:
        return len(self.partitions)

    @property
    def n(self) -> int:
        return self.partitions[0].n


@dataclass(frozen=True)
class ConsensusResult:
    """Pooled partition, its exact objective value, and solver bookkeeping.

    ``objective`` is always recomputed from the pooled partition, never
    taken from the solver's internal accounting.  ``trace`` holds the
    per-iteration relaxed objective for nmf, the best-so-far objective per
    sweep for saom, and the single optimum for exact.
    """

    pooled: Partition
    objective: int
    solver: str
    trace: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.objective < 0:
            raise ValueError("objective must be nonnegative")
        object.__setattr__(self, "trace", tuple(float(t) for t in self.trace))

    def to_json(self) -> dict:
        return {
            "labels": [int(x) for x in self.pooled.labels],
            "k": self.pooled.k_max,
            "objective": int(self.objective),
            "solver": self.solver,
            "trace": list(self.trace),
        }


@dataclass(frozen=True)
class AnnealSchedule:
    """Cooling schedule for the single-label-move annealer.

    ``t0=None`` estimates the initial temperature as the largest |change in
    objective| over 50 random probe moves; ``moves_per_sweep=None`` uses
    100 * n.
    """

    sweeps: int = 50
    moves_per_sweep: int | None = None
    cooling: float = 0.95
    t0: float | None = None
    probe_moves: int = 50

    def __post_init__(self):
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        if self.moves_per_sweep is not None and self.moves_per_sweep < 1:
            raise ValueError("moves_per_sweep must be >= 1")
        if not 0.0 < self.cooling <= 1.0:
            raise ValueError("cooling must be in (0, 1]")


def consensus_objective(p: Partition, problem: ConsensusProblem) -> int:
    """Summed Mirkin distance from ``p`` to every contributory partition."""
    return sum(mirkin_distance(p, q) for q in problem.partitions)


def _comembership_counts(problem: ConsensusProblem) -> np.ndarray:
    """S[i, j] = number of contributory partitions placing i and j together."""
    n = problem.n
    S = np.zeros((n, n), dtype=np.int64)
    for q in problem.partitions:
        labels = q.labels
        S += labels[:, None] == labels[None, :]
    return S


def _compress_to_k(labels: np.ndarray, k: int) -> np.ndarray:
    """Map labels into [0, k): clusters ranked by size (ties: first seen)."""
    sizes = np.bincount(labels)
    seen = {}
    for lab in labels:
        if lab not in seen:
            seen[lab] = len(seen)
    order = sorted(seen, key=lambda lab: (-sizes[lab], seen[lab]))
    rank = {lab: min(r, k - 1) for r, lab in enumerate(order)}
    return np.array([rank[lab] for lab in labels], dtype=np.int64)


def _best_contributory(problem: ConsensusProblem) -> tuple[np.ndarray, int]:
    best_labels, best_obj = None, None
    for q in problem.partitions:
        obj = consensus_objective(q, problem)
        if best_obj is None or obj < best_obj:
            best_labels, best_obj = q.labels, obj
    return _compress_to_k(best_labels, problem.k), int(best_obj)


def consensus_nmf(problem: ConsensusProblem, tol: float = 1e-6, max_iter: int = 500,
                  ortho_penalty: float = 0.0, random_state=None) -> ConsensusResult:
    """Pool partitions by symmetric NMF of the mean co-membership matrix.

    G (n x k, nonnegative) is warm-started from a randomly chosen
    contributory partition's indicator matrix plus small uniform noise and
    refined by the damped multiplicative update

        G <- G * (1/2 + 1/2 * (Mbar G) / (G G^T G + penalty)),

    which cannot increase ``||Mbar - G G^T||^2`` when ``ortho_penalty`` is
    zero (checked every iteration).  ``ortho_penalty`` > 0 additionally
    suppresses the off-diagonal of G^T G.  Rows are hardened by argmax
    (ties: lowest cluster index); if the best contributory partition beats
    the hardened result, it is returned instead, which keeps the solution
    within twice the optimum.
    """
    rng = derive_rng(resolve_seed(random_state), "consensus-nmf")
    k = problem.k
    n = problem.n
    Mbar = mean_connectivity(list(problem.partitions)).m
    pick = int(rng.integers(problem.m))
    warm = problem.partitions[pick].labels
    G = rng.uniform(0.0, 0.01, size=(n, k))
    inside = warm < k
    G[np.arange(n)[inside], warm[inside]] += 1.0

    def relaxed(G):
        R = Mbar - G @ G.T
        return float((R * R).sum())

    trace = [relaxed(G)]
    for _ in range(max_iter):
        numer = Mbar @ G
        GtG = G.T @ G
        denom = G @ GtG
        if ortho_penalty > 0.0:
            off = GtG - np.diag(np.diag(GtG))
            denom = denom + ortho_penalty * (G @ off)
        G = G * (0.5 + 0.5 * numer / np.maximum(denom, 1e-300))
        obj = relaxed(G)
        if ortho_penalty == 0.0 and obj > trace[-1] * (1 + 1e-9) + 1e-12:
            raise RuntimeError("symmetric NMF objective increased; numerical failure")
        prev = trace[-1]
        trace.append(obj)
        if prev - obj < tol * max(prev, 1e-300):
            break
    hardened = G.argmax(axis=1).astype(np.int64)
    candidate = Partition(hardened, k)
    obj_hard = consensus_objective(candidate, problem)
    fallback_labels, fallback_obj = _best_contributory(problem)
    if fallback_obj < obj_hard:
        candidate = Partition(fallback_labels, k)
        obj_hard = consensus_objective(candidate, problem)
    return ConsensusResult(candidate, obj_hard, "nmf", tuple(trace))


def _objective_from_counts(labels: np.ndarray, S: np.ndarray, m: int) -> int:
    """L(labels) from the co-membership counts, in O(n^2)."""
    co = labels[:, None] == labels[None, :]
    return int(S.sum()) + int((m - 2 * S[co]).sum())


def consensus_saom(problem: ConsensusProblem, schedule: AnnealSchedule | None = None,
                   random_state=None) -> ConsensusResult:
    """Pool partitions by simulated annealing over single-label moves.

    State: a label vector in [0, k).  A move reassigns one individual to a
    different cluster; the objective change is evaluated in O(1) from
    maintained per-cluster co-membership sums, and accepted by the
    Metropolis rule under geometric cooling.  Starts from the contributory
    partition with the smallest objective and returns the best state ever
    visited (so the result is never worse than the best contributory
    partition).  The trace records the best objective after each sweep.
    """
    if schedule is None:
        schedule = AnnealSchedule()
    seed = resolve_seed(random_state)
    rng = derive_rng(seed, "consensus-saom")
    k = problem.k
    n = problem.n
    m = problem.m
    S = _comembership_counts(problem)
    labels, _ = _best_contributory(problem)
    labels = labels.copy()
    current = _objective_from_counts(labels, S, m)
    best_labels, best = labels.copy(), current

    if k == 1 or n == 1:
        pooled = Partition(np.zeros(n, dtype=np.int64) if k == 1 else labels, k)
        obj = consensus_objective(pooled, problem)
        return ConsensusResult(pooled, obj, "saom", (float(obj),))

    # A[i, g] = sum of S[i, j] over j currently labeled g; counts[g] = cluster size
    onehot = np.zeros((n, k))
    onehot[np.arange(n), labels] = 1.0
    A = S @ onehot
    counts = np.bincount(labels, minlength=k).astype(np.int64)

    def delta(j: int, b: int) -> float:
        a = labels[j]
        return 2.0 * (2.0 * (A[j, a] - A[j, b]) + m * (counts[b] - counts[a] - 1))

    # delta derivation: moving j from cluster a to b flips the co-membership
    # of the 2*(n-1) ordered pairs involving j; pairs with partners in a
    # change by 2*S - m each, pairs with partners in b by m - 2*S, summed
    # via A and the cluster sizes (j itself contributes S[j, j] = m).

    probes = min(schedule.probe_moves, 10 * n)
    if schedule.t0 is not None:
        temp = float(schedule.t0)
    else:
        temp = 1.0
        for _ in range(probes):
            j = int(rng.integers(n))
            b = int(rng.integers(k - 1))
            if b >= labels[j]:
                b += 1
            temp = max(temp, abs(delta(j, b)))
    moves = schedule.moves_per_sweep if schedule.moves_per_sweep is not None else 100 * n
    trace = []
    for _ in range(schedule.sweeps):
        j_draw = rng.integers(0, n, size=moves)
        b_draw = rng.integers(0, k - 1, size=moves)
        u_draw = rng.random(size=moves)
        for t in range(moves):
            j = int(j_draw[t])
            a = int(labels[j])
            b = int(b_draw[t])
            if b >= a:
                b += 1
            d = delta(j, b)
            if d <= 0.0 or u_draw[t] < np.exp(-d / temp):
                labels[j] = b
                col = S[:, j]
                A[:, a] -= col
                A[:, b] += col
                counts[a] -= 1
                counts[b] += 1
                current += d
                if current < best:
                    best = current
                    best_labels = labels.copy()
                    if best == 0:
                        break
        trace.append(float(best))
        if best == 0:
            break
        temp *= schedule.cooling
    pooled = Partition(best_labels, k)
    obj = consensus_objective(pooled, problem)
    return ConsensusResult(pooled, obj, "saom", tuple(trace))


def _restricted_growth_strings(n: int, k: int):
    """All partitions of n items into at most k blocks, one representative each.

    Yields label vectors in lexicographic order of the restricted growth
    string: labels[0] = 0 and labels[i] <= max(labels[:i]) + 1, capped at
    k - 1.
    """
    labels = np.zeros(n, dtype=np.int64)
    maxes = np.zeros(n, dtype=np.int64)  # maxes[i] = max(labels[:i+1])
    yield labels
    while True:
        i = n - 1
        while i > 0:
            cap = min(maxes[i - 1] + 1, k - 1)
            if labels[i] < cap:
                break
            i -= 1
        if i == 0:
            return
        labels[i] += 1
        maxes[i] = max(maxes[i - 1], labels[i])
        labels[i + 1:] = 0
        maxes[i + 1:] = maxes[i]
        yield labels


def consensus_exact(problem: ConsensusProblem, max_n: int = 10) -> ConsensusResult:
    """Global minimizer of the consensus objective by full enumeration.

    Enumerates restricted growth strings (partitions into at most k
    blocks, one labeling per equivalence class); refuses n > ``max_n``.
    Ties go to the lexicographically smallest string.
    """
    n = problem.n
    if n > max_n:
        raise ValueError(f"exact consensus is limited to n <= {max_n} individuals (got {n})")
    S = _comembership_counts(problem)
    m = problem.m
    best_labels, best = None, None
    for labels in _restricted_growth_strings(n, problem.k):
        obj = _objective_from_counts(labels, S, m)
        if best is None or obj < best:
            best_labels, best = labels.copy(), obj
            if best == 0:
                break
    pooled = Partition(best_labels, problem.k)
    obj = consensus_objective(pooled, problem)
    return ConsensusResult(pooled, obj, "exact", (float(obj),))


_SOLVERS = {
    "nmf": consensus_nmf,
    "saom": consensus_saom,
    "exact": lambda problem, random_state=None: consensus_exact(problem),
}


def solve_consensus(problem: ConsensusProblem, solver: str = "nmf", random_state=None,
                    **kwargs) -> ConsensusResult:
    """Dispatch to a consensus solver by name ('nmf', 'saom' or 'exact')."""
    if solver not in _SOLVERS:
        raise ValueError(f"unknown solver {solver!r}; expected one of {sorted(_SOLVERS)}")
    return _SOLVERS[solver](problem, random_state=random_state, **kwargs)
