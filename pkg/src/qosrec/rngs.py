"""Self-contained, documented PRNGs for splits and feature seeding.

Two generators are pinned here so that train/test splits and random feature
stores can be reproduced outside this package from the constants alone:

* splitmix64 -- Steele/Lea/Flood generator. State advances by the 64-bit
  golden-gamma constant; outputs pass through the three-round finalizer.
  Used for per-entity feature seeding (order-independent).
* PCG32 (PCG-XSH-RR, 64-bit state, fixed stream) -- used to drive a
  Fisher-Yates shuffle over observed-cell indices for splitting.

All arithmetic is modulo 2**64 (or 2**32 for PCG outputs).
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

SPLITMIX64_GAMMA = 0x9E3779B97F4A7C15


def splitmix64_mix(z: int) -> int:
    """The splitmix64 output finalizer applied to a single 64-bit word."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def splitmix64_stream(state: int, n: int) -> np.ndarray:
    """First ``n`` splitmix64 outputs from ``state``, as a uint64 array.

    Output j (0-based) is ``mix(state + (j + 1) * gamma)``, which makes the
    whole stream computable in one vectorized pass.
    """
    steps = np.arange(1, n + 1, dtype=np.uint64)
    z = np.uint64(state & _MASK64) + steps * np.uint64(SPLITMIX64_GAMMA)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def unit_uniform(bits: np.ndarray) -> np.ndarray:
    """Map uint64 words to float64 uniform on [0, 1) via the top 53 bits."""
    return (bits >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


class Pcg32:
    """PCG-XSH-RR: 64-bit LCG state, 32-bit rotated-xorshift output.

    Seeded like the reference ``pcg32_srandom`` with a fixed stream
    selector, so a given seed produces one well-defined sequence.
    """

    MULTIPLIER = 6364136223846793005
    STREAM = 0xDA3E39CB94B95BDB

    def __init__(self, seed: int) -> None:
        self._inc = ((self.STREAM << 1) | 1) & _MASK64
        self._state = 0
        self.next_u32()
        self._state = (self._state + (seed & _MASK64)) & _MASK64
        self.next_u32()

    def next_u32(self) -> int:
        old = self._state
        self._state = (old * self.MULTIPLIER + self._inc) & _MASK64
        xorshifted = (((old >> 18) ^ old) >> 27) & 0xFFFFFFFF
        rot = old >> 59
        return ((xorshifted >> rot) | (xorshifted << ((32 - rot) & 31))) & 0xFFFFFFFF

    def next_below(self, bound: int) -> int:
        """Uniform integer on [0, bound) via rejection (no modulo bias)."""
        if not 0 < bound <= 1 << 32:
            raise ValueError(f"bound out of range: {bound}")
        threshold = ((1 << 32) - bound) % bound
        while True:
            r = self.next_u32()
            if r >= threshold:
                return r % bound


def permutation(n: int, seed: int) -> np.ndarray:
    """Fisher-Yates permutation of range(n) driven by ``Pcg32(seed)``.

    The loop runs i = n-1 .. 1, drawing j uniform on [0, i] and swapping
    positions i and j. Inlined PCG state updates keep this usable on
    million-element index sets.
    """
    perm = list(range(n))
    mult = Pcg32.MULTIPLIER
    inc = ((Pcg32.STREAM << 1) | 1) & _MASK64
    state = 0
    state = (state * mult + inc) & _MASK64
    state = (state + (seed & _MASK64)) & _MASK64
    state = (state * mult + inc) & _MASK64
    for i in range(n - 1, 0, -1):
        bound = i + 1
        threshold = ((1 << 32) - bound) % bound
        while True:
            old = state
            state = (old * mult + inc) & _MASK64
            xorshifted = (((old >> 18) ^ old) >> 27) & 0xFFFFFFFF
            rot = old >> 59
            r = ((xorshifted >> rot) | (xorshifted << ((32 - rot) & 31))) & 0xFFFFFFFF
            if r >= threshold:
                j = r % bound
                break
        perm[i], perm[j] = perm[j], perm[i]
    return np.asarray(perm, dtype=np.int64)
