"""Portable deterministic RNG for corpus perturbations.

The perturbation outputs must be reproducible bit-for-bit across platforms
and library versions, so they draw from a self-contained SplitMix64 stream
rather than numpy's generators.  All arithmetic is modulo 2**64.
"""
from __future__ import annotations

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix(value: int) -> int:
    z = value & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


class SplitMix64:
    """SplitMix64 generator over 64-bit unsigned integers."""

    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError(f"seed must be non-negative, got {seed}")
        self._state = seed & _MASK

    def next_uint64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK
        return _mix(self._state)

    def bounded(self, n: int) -> int:
        """Uniform draw from [0, n) by rejection (no modulo bias)."""
        if n <= 0:
            raise ValueError(f"bound must be positive, got {n}")
        # Largest multiple of n that fits in 64 bits; values at or above it
        # would fold unevenly, so they are rejected.
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            value = self.next_uint64()
            if value < limit:
                return value % n

    def uniform(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_uint64() >> 11) * (1.0 / (1 << 53))

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.bounded(i + 1)
            items[i], items[j] = items[j], items[i]


def substream(seed: int, index: int) -> SplitMix64:
    """Independent generator number ``index`` under a master ``seed``.

    Seeded by mixing the master seed with a mixed, golden-ratio-spaced
    counter, so distinct (seed, index) pairs give unrelated streams.
    """
    if index < 0:
        raise ValueError(f"index must be non-negative, got {index}")
    return SplitMix64(_mix(seed) ^ _mix(((index + 1) * _GOLDEN) & _MASK))
