"""Seeded splitmix64 generator.

splitmix64 is counter based (output ``k`` only depends on ``seed + k*gamma``),
so bulk draws are vectorised with numpy uint64 arithmetic and stay
bit-identical to the scalar sequence.
"""
from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _M1) & _MASK
    z = ((z ^ (z >> 27)) * _M2) & _MASK
    return z ^ (z >> 31)


def _mix_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Deterministic 64-bit generator with the handful of draws the pipeline needs."""

    def __init__(self, seed: int = 0):
        self.state = int(seed) & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK
        return _mix(self.state)

    def u64(self, n: int) -> np.ndarray:
        if n <= 0:
            return np.zeros(0, dtype=np.uint64)
        k = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + k * np.uint64(_GAMMA)
            out = _mix_array(z)
        self.state = (self.state + n * _GAMMA) & _MASK
        return out

    def random(self, size=None):
        """Uniform floats in [0, 1) with 53 bits of precision."""
        if size is None:
            return (self.next_u64() >> 11) * 2.0**-53
        shape = (size,) if isinstance(size, int) else tuple(size)
        n = int(np.prod(shape)) if shape else 1
        vals = (self.u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return vals.reshape(shape)

    def uniform(self, low: float, high: float, size=None):
        return low + (high - low) * self.random(size)

    def integer(self, high: int) -> int:
        """Uniform integer in [0, high)."""
        if high <= 0:
            raise ValueError("high must be positive")
        return (self.next_u64() * high) >> 64

    def normal(self, size) -> np.ndarray:
        """Standard normal draws via Box-Muller."""
        shape = (size,) if isinstance(size, int) else tuple(size)
        n = int(np.prod(shape))
        m = (n + 1) // 2
        u1 = 1.0 - self.random(m)  # (0, 1]
        u2 = self.random(m)
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])
        return z[:n].reshape(shape)

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self.u64(n), kind="stable")

    def choice(self, seq):
        return seq[self.integer(len(seq))]

    def bernoulli(self, p: float) -> bool:
        return self.random() < p

    def spawn(self) -> "SplitMix64":
        """Independent child stream seeded from this one."""
        return SplitMix64(self.next_u64())
