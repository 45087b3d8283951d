"""Counter-based random streams for reproducible, order-independent draws.

Every noise draw is keyed by its logical coordinates rather than consumed from
a shared sequential stream, so evaluating candidates in any order (or skipping
some) can never shift later draws. Built on Philox, whose 4x64 counter lets us
address streams directly.
"""

from __future__ import annotations

import numpy as np
from numpy.random import Generator, Philox

_MASK64 = (1 << 64) - 1
# Key-word tag separating the prior stream from per-iteration noise streams
# (iteration numbers never get anywhere near this).
_PRIOR_TAG = 0x9E3779B97F4A7C15


def prior_normals(seed: int, n: int, dim: int) -> np.ndarray:
    """``n`` standard-normal vectors of dimension ``dim``; (seed, n, dim)-deterministic."""
    key = np.array([seed & _MASK64, _PRIOR_TAG], dtype=np.uint64)
    return Generator(Philox(key=key)).standard_normal((n, dim))


def noise_normals(seed: int, iteration: int, elite_idx: int, noise_idx: int, dim: int) -> np.ndarray:
    """One standard-normal vector from the stream keyed by (seed, iteration, elite, noise)."""
    key = np.array([seed & _MASK64, iteration & _MASK64], dtype=np.uint64)
    counter = np.array([0, 0, elite_idx & _MASK64, noise_idx & _MASK64], dtype=np.uint64)
    return Generator(Philox(key=key, counter=counter)).standard_normal(dim)
