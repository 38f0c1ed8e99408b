"""Counter-based random number generation.

Every draw is a pure function of (seed, counter), so any slice of a noise
block can be regenerated in isolation: results never depend on evaluation
order, chunking, or worker count.  The mixer is splitmix64 (the finalizer
from Java's SplittableRandom); normals come from an explicit Box-Muller
transform so the uniform-to-normal mapping is fixed across platforms.
"""

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_INV_2_53 = float(2.0**-53)


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def uniform_block(seed: int, start: int, count: int) -> np.ndarray:
    """Uniform [0, 1) doubles for counters start..start+count-1."""
    counters = np.arange(start, start + count, dtype=np.uint64)
    bits = _mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + (counters + np.uint64(1)) * _GOLDEN)
    return (bits >> np.uint64(11)).astype(np.float64) * _INV_2_53


def gaussian_rows(seed: int, row_start: int, row_count: int, dim: int) -> np.ndarray:
    """Standard-normal rows [row_start, row_start+row_count) of the (seed, dim) block.

    Row j consumes counters [j * w, (j + 1) * w) where w = dim rounded up to
    even, so gaussian_rows(s, a, n, d) == gaussian_block(s, m, d)[a:a+n] for
    any m >= a + n.
    """
    width = dim + (dim & 1)
    u = uniform_block(seed, row_start * width, row_count * width)
    u = u.reshape(row_count, width)
    # 1 - u maps [0, 1) onto (0, 1], keeping log() finite.
    r = np.sqrt(-2.0 * np.log(1.0 - u[:, 0::2]))
    theta = 2.0 * np.pi * u[:, 1::2]
    z = np.empty((row_count, width))
    z[:, 0::2] = r * np.cos(theta)
    z[:, 1::2] = r * np.sin(theta)
    return z[:, :dim]


def gaussian_block(seed: int, count: int, dim: int) -> np.ndarray:
    """Standard-normal (count, dim) block for the given seed."""
    return gaussian_rows(seed, 0, count, dim)
