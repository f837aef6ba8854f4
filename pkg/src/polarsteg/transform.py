"""Length-2^n polar transform x = u * G over GF(2) and its index permutation.

The generator is the bit-reversed Kronecker power of the 2x2 lower-triangular
kernel.  It is self-inverse, which is what makes extraction a second forward
transform.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

__all__ = ["bit_reversal_permutation", "polar_transform", "is_power_of_two"]


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@lru_cache(maxsize=None)
def _bitrev_cached(n: int) -> np.ndarray:
    idx = np.arange(1 << n, dtype=np.int64)
    rev = np.zeros_like(idx)
    for _ in range(n):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    rev.setflags(write=False)
    return rev


def bit_reversal_permutation(n: int) -> np.ndarray:
    """Index permutation of [0, 2^n) that reverses each n-bit index.

    Self-inverse.  Indices here and everywhere else in the package are
    0-based; written material about the scheme usually counts from 1.
    """
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    return _bitrev_cached(int(n)).copy()


def polar_transform(u: np.ndarray) -> np.ndarray:
    """Multiply a bit vector by the bit-reversed polar generator over GF(2).

    Runs the O(N log N) butterfly on the bit-reversal-permuted input, which
    equals the direct matrix product.  Applying it twice returns the input.
    """
    u = np.asarray(u)
    N = u.shape[0]
    if not is_power_of_two(N):
        raise ValueError(f"length must be a power of two, got {N}")
    n = N.bit_length() - 1
    x = u[_bitrev_cached(n)].astype(np.uint8)
    h = 1
    while h < N:
        x = x.reshape(-1, 2, h)
        x[:, 0, :] ^= x[:, 1, :]
        h *= 2
    return x.reshape(N)
