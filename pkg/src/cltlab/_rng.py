"""Seeded random streams.

Every stochastic routine draws from Philox generators derived from a
``SeedSequence``.  Large draws are split into fixed-size blocks, each with its
own child seed, so results depend only on ``(seed, block index)`` and never on
how the blocks are scheduled.
"""

from __future__ import annotations

from typing import Iterator

import numpy as np

BLOCK_SIZE = 1 << 15


def generator(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for ``seed`` and an optional spawn key."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def blocks(seed: int, total: int, *key: int, block: int = BLOCK_SIZE) -> Iterator[tuple[np.random.Generator, int]]:
    """Yield ``(rng, size)`` pairs covering ``total`` draws."""
    start = 0
    index = 0
    while start < total:
        size = min(block, total - start)
        yield generator(seed, *key, index), size
        start += size
        index += 1


def gaussian(seed: int, m: int, d: int, *key: int) -> np.ndarray:
    """``m`` standard Gaussian vectors in ``R^d`` drawn block by block."""
    parts = [rng.standard_normal((size, d)) for rng, size in blocks(seed, m, *key)]
    if not parts:
        return np.empty((0, d))
    return np.concatenate(parts, axis=0)
