"""Seeded, splittable random streams.

Every stochastic routine takes a :class:`numpy.random.Generator`.  Streams for
independent chains are derived from ``(seed, *key)`` through
:class:`numpy.random.SeedSequence` spawn keys, so chain ``i`` sees the same
numbers no matter how many chains run or in which worker.
"""

import numpy as np


def make_stream(seed: int, *key: int) -> np.random.Generator:
    """Generator for the sub-stream ``key`` of ``seed`` (PCG64)."""
    if seed is None:
        raise ValueError("an explicit seed is required")
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def chain_stream(seed: int, chain_index: int, *key: int) -> np.random.Generator:
    return make_stream(seed, *key, chain_index)
