"""Reproducible random streams.

``substream(seed, j)`` is a Philox counter-based generator keyed on the pair
(seed, j): streams for different ``j`` are independent and can be consumed in
any order or in parallel without changing results.
"""
import numpy as np

_MASK64 = (1 << 64) - 1


def check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed <= _MASK64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def substream(seed: int, j: int) -> np.random.Generator:
    seed = check_seed(seed)
    j = int(j) & _MASK64
    return np.random.Generator(np.random.Philox(key=(j << 64) | seed))


def child_seed(seed: int, j: int) -> int:
    """A 64-bit seed derived from (seed, j), for handing to another component."""
    return int(substream(seed, j).integers(0, 1 << 63))
