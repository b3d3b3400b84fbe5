"""Deterministic pseudo-random generator used for splits, shuffles and
weight initialization.

A xoshiro256** generator is implemented directly (rather than relying on
numpy's PCG64) so that every random decision in the toolkit is pinned to a
small, auditable algorithm: the same 64-bit seed reproduces the same shuffle
order and the same initial weights on any platform.  The 256-bit state is
expanded from the seed with splitmix64, the standard seeding recipe for the
xoshiro family.
"""

from __future__ import annotations

_MASK64 = 0xFFFFFFFFFFFFFFFF


def _splitmix64_stream(seed: int):
    state = seed & _MASK64
    while True:
        state = (state + 0x9E3779B97F4A7C15) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        yield z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Xoshiro256StarStar:
    """xoshiro256** with splitmix64 seeding from a single u64 seed."""

    def __init__(self, seed: int):
        if not 0 <= seed <= _MASK64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        sm = _splitmix64_stream(seed)
        self._s = [next(sm) for _ in range(4)]

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def bounded(self, n: int) -> int:
        """Uniform integer in [0, n) via 128-bit multiply-shift."""
        if n <= 0:
            raise ValueError("bound must be positive")
        return (self.next_u64() * n) >> 64

    def uniform(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0 ** -53

    def uniform_symmetric(self, limit: float) -> float:
        """Uniform double in [-limit, limit)."""
        return (2.0 * self.uniform() - 1.0) * limit

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.bounded(i + 1)
            items[i], items[j] = items[j], items[i]
