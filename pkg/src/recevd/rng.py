"""Seeded, splittable random streams.

Every stream is a PCG64 generator keyed by ``numpy.random.SeedSequence(seed,
spawn_key=keys)``. A (seed, keys) pair always yields the same stream and
distinct keys yield statistically independent streams, so work can be split
across workers without changing results.
"""
from __future__ import annotations

import numpy as np

# first spawn-key component, one per consumer
ORBIT = 0
REPLICATE = 1
SYNTHETIC = 2


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return seed


def substream(seed: int, *keys: int) -> np.random.Generator:
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))
