"""Deterministic pseudorandom primitives used for splits and masking.

The generator is SplitMix64 driving an in-place Fisher-Yates shuffle.
It is tiny, fully specified in FORMATS.md, and independent of any
library's stream guarantees, so partitions and masks reproduce exactly
across platforms and versions.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1


def splitmix64(state: int) -> tuple[int, int]:
    """One SplitMix64 step: returns (next_state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


class SplitMix64:
    """Stream wrapper around splitmix64 with bounded draws."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state, out = splitmix64(self._state)
        return out

    def below(self, bound: int) -> int:
        """Uniform integer in [0, bound) by rejection (no modulo bias)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit = _MASK64 - (_MASK64 + 1) % bound
        while True:
            v = self.next_u64()
            if v <= limit:
                return v % bound


def permutation(n: int, seed: int) -> list[int]:
    """Fisher-Yates permutation of range(n), fully determined by seed."""
    rng = SplitMix64(seed)
    idx = list(range(n))
    for i in range(n - 1, 0, -1):
        j = rng.below(i + 1)
        idx[i], idx[j] = idx[j], idx[i]
    return idx


def derive_seed(global_seed: int, index: int) -> int:
    """Per-record seed: mix the record index into the global seed.

    Two SplitMix64 outputs keep streams for different indices decorrelated
    even for adjacent seeds.
    """
    _, a = splitmix64((global_seed & _MASK64) ^ 0xA5A5A5A5A5A5A5A5)
    _, b = splitmix64((a + index) & _MASK64)
    return b
