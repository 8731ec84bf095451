"""Sobol low-discrepancy sequence generator.

Gray-code construction with the standard direction-number table for the
first 10 dimensions.  The leading all-zeros point is skipped, so the first
emitted point is 0.5 in every dimension.
"""

from __future__ import annotations

import numpy as np

BITS = 32
_SCALE = float(2 ** BITS)

# Per dimension (from the 2nd on): polynomial degree s, coefficient a, and
# the initial direction integers m_1..m_s.
_DIRECTION_SEED = [
    (1, 0, (1,)),
    (2, 1, (1, 3)),
    (3, 1, (1, 3, 1)),
    (3, 2, (1, 1, 1)),
    (4, 1, (1, 1, 3, 3)),
    (4, 4, (1, 3, 5, 13)),
    (5, 2, (1, 1, 5, 5, 17)),
    (5, 4, (1, 1, 5, 5, 5)),
    (5, 7, (1, 1, 7, 11, 19)),
]

MAX_DIMENSIONS = 1 + len(_DIRECTION_SEED)


class DimensionLimit(Exception):
    """Requested dimension exceeds the shipped direction-number table."""


def _direction_numbers(dim: int) -> list[int]:
    """v_1..v_BITS for one dimension, scaled by 2^(BITS-k)."""
    if dim == 0:
        return [1 << (BITS - k) for k in range(1, BITS + 1)]
    s, a, m_init = _DIRECTION_SEED[dim - 1]
    m = list(m_init)
    for k in range(s, BITS):
        new = m[k - s] ^ (m[k - s] << s)
        for i in range(1, s):
            if (a >> (s - 1 - i)) & 1:
                new ^= m[k - i] << i
        m.append(new)
    return [m[k] << (BITS - 1 - k) for k in range(BITS)]


def sobol_sequence(dimensions: int, count: int) -> np.ndarray:
    """First `count` points of the sequence in the unit hypercube.

    Returns an array of shape (count, dimensions).  Deterministic; raises
    DimensionLimit beyond MAX_DIMENSIONS.
    """
    if dimensions < 1:
        raise ValueError("dimensions must be >= 1")
    if dimensions > MAX_DIMENSIONS:
        raise DimensionLimit(
            f"direction numbers shipped for up to {MAX_DIMENSIONS} dimensions, "
            f"got {dimensions}")
    if count < 0:
        raise ValueError("count must be >= 0")
    v = [_direction_numbers(j) for j in range(dimensions)]
    out = np.empty((count, dimensions), dtype=float)
    state = [0] * dimensions
    for i in range(count):
        # lowest zero bit position of i (1-based) drives the Gray-code step
        c = 0
        val = i
        while val & 1:
            val >>= 1
            c += 1
        for j in range(dimensions):
            state[j] ^= v[j][c]
            out[i, j] = state[j] / _SCALE
    return out


def scale_to_bounds(points: np.ndarray, bounds) -> np.ndarray:
    """Affinely map unit-cube points into [(low, high), ...] per dimension."""
    lows = np.array([b[0] for b in bounds])
    highs = np.array([b[1] for b in bounds])
    if np.any(highs <= lows):
        raise ValueError("each bound needs low < high")
    return lows + points * (highs - lows)
