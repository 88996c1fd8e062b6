"""Deterministic counter-based random streams.

Every draw opens a fresh Philox generator keyed by ``(seed, counter)``, so a
stream's output depends only on those two integers: it is reproducible across
platforms and independent of how many values earlier draws consumed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(*parts) -> int:
    """Mix ints/strings into a 64-bit seed, stable across runs and platforms."""
    digest = hashlib.sha256(repr(tuple(parts)).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass
class RngStream:
    """Counter-based RNG: identical ``(seed, counter)`` pairs give identical draws."""

    seed: int
    counter: int = 0

    def __post_init__(self) -> None:
        if not 0 <= int(self.seed) <= _MASK64:
            raise ValueError(f"seed must be a 64-bit nonnegative integer, got {self.seed}")
        if self.counter < 0:
            raise ValueError(f"counter must be nonnegative, got {self.counter}")

    def _next(self) -> np.random.Generator:
        key = np.array([self.seed, self.counter], dtype=np.uint64)
        gen = np.random.Generator(np.random.Philox(key=key))
        self.counter += 1
        return gen

    def random(self, shape=None):
        """Uniform float64 draws in [0, 1)."""
        return self._next().random(shape)

    def uniform(self, low: float, high: float, shape=None):
        """Uniform float64 draws in [low, high)."""
        return self._next().uniform(low, high, shape)

    def permutation(self, n: int) -> np.ndarray:
        """Random permutation of range(n)."""
        return self._next().permutation(n)

    def derive(self, *tags) -> "RngStream":
        """Child stream keyed off this stream's seed and the given tags.

        Children are independent of the parent's counter state, so the same
        tags always name the same stream.
        """
        return RngStream(derive_seed(self.seed, *tags))
