"""Deterministic seed derivation.

All randomness in the package flows from one integer seed through
``derive_rng(seed, *path)``.  The path is a sequence of labels (strings or
ints) naming the consumer, e.g. ``("impute", copy_index)``.  Each path maps
to an independent, reproducible stream, so work items can run in any order
(or in parallel) and still produce the same results, and a CLI rerun with
the same ``--seed`` is byte-identical.

Derivation: every path component is hashed (SHA-256, first 16 bytes) into a
spawn key for ``numpy.random.SeedSequence``.  Identical ``(seed, path)``
pairs therefore yield identical generators on any platform.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _spawn_key(part) -> tuple[int, ...]:
    digest = hashlib.sha256(repr(part).encode("utf-8")).digest()[:16]
    return tuple(int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4))


def derive_seed_sequence(seed: int, *path) -> np.random.SeedSequence:
    key: tuple[int, ...] = ()
    for part in path:
        key = key + _spawn_key(part)
    return np.random.SeedSequence(int(seed), spawn_key=key)


def derive_rng(seed: int, *path) -> np.random.Generator:
    """Generator for the stream named by ``path`` under the root ``seed``."""
    return np.random.default_rng(derive_seed_sequence(seed, *path))


def derive_seed(seed: int, *path) -> int:
    """A plain integer child seed (for APIs that take a seed, not a Generator)."""
    return int(derive_seed_sequence(seed, *path).generate_state(1, np.uint64)[0])


def resolve_seed(random_state) -> int:
    """Turn ``random_state`` into a concrete root seed.

    ``None`` draws fresh OS entropy (non-reproducible by construction);
    anything else must be a nonnegative integer.
    """
    if random_state is None:
        return int(np.random.SeedSequence().entropy % (2 ** 63))
    if isinstance(random_state, (int, np.integer)):
        return int(random_state)
    raise TypeError(f"random_state must be an int or None, got {type(random_state).__name__}")


def check_rng(random_state) -> np.random.Generator:
    """Accept a Generator, an int seed, or None, and return a Generator."""
    if isinstance(random_state, np.random.Generator):
        return random_state
    return np.random.default_rng(random_state)
