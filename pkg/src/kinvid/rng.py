"""Seedable 64-bit RNG with a fixed, documented algorithm.

The evaluation protocol (negative-pair generation, synthetic datasets) must
reproduce bit-for-bit across runs and across implementations in other
languages, so it cannot depend on numpy's generator internals.  This module
implements SplitMix64 (Steele, Lea & Flood 2014), a tiny well-studied
generator whose whole state is one 64-bit word:

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    output = z ^ (z >> 31)

Derived draws are defined on top of the raw 64-bit stream:

* ``bounded(n)``  -> ``next_u64() % n`` (modulo; bias < n / 2**64, irrelevant
  for protocol-sized n and trivially portable).
* ``uniform()``   -> ``(next_u64() >> 11) * 2**-53`` in [0, 1).
* ``gauss()``     -> Box-Muller from two ``uniform()`` draws, the cosine
  variate only; the log argument uses ``1 - u`` to avoid log(0).
"""

from __future__ import annotations

import math

_MASK = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15


class SplitMix64:
    """Deterministic 64-bit generator; identical streams for identical seeds."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return (z ^ (z >> 31)) & _MASK

    def bounded(self, n: int) -> int:
        """Integer in [0, n).  n must be positive."""
        if n <= 0:
            raise ValueError("bounded() requires n > 0")
        return self.next_u64() % n

    def uniform(self) -> float:
        """Float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def gauss(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        """Standard Box-Muller normal variate (cosine branch)."""
        u1 = self.uniform()
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(1.0 - u1))
        return mu + sigma * r * math.cos(2.0 * math.pi * u2)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle driven by bounded()."""
        for i in range(len(items) - 1, 0, -1):
            j = self.bounded(i + 1)
            items[i], items[j] = items[j], items[i]
