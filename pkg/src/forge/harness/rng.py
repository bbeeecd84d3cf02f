"""Seeded random streams.

Every instance draws from numpy's PCG64 bit generator seeded by
``SeedSequence(entropy=seed, spawn_key=(index,))``.  The stream for instance
``index`` of a suite therefore depends only on (seed, index), which keeps
parallel runs identical to serial ones.  PCG64 and SeedSequence are stable
across numpy releases and platforms.
"""

from __future__ import annotations

import numpy as np

ALGORITHM = "numpy.PCG64 / SeedSequence(entropy=seed, spawn_key=(index,))"


def stream(seed: int, index: int = 0) -> np.random.Generator:
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(index,))))
