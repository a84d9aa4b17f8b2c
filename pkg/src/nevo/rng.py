"""Deterministic random streams.

Every stream is a numpy ``Generator`` backed by PCG64, seeded through
``SeedSequence(entropy=[seed, label])``.  The pair (seed, label) fully
determines the draw sequence; no global state is touched.  Draw sequences are
stable for a given numpy build, which is the only reproducibility promise made.
"""

from __future__ import annotations

from typing import Sequence, TypeVar

import numpy as np

T = TypeVar("T")

MASK64 = (1 << 64) - 1

# Sub-stream labels used by one variation step.
CHOICE = 0
STRUCTURE = 1
PERTURB = 2
INIT = 3


class RngStream:
    """Single-owner random stream with the few draw kinds the library needs."""

    __slots__ = ("_gen",)

    def __init__(self, seed: int, label: int = 0):
        if seed < 0 or seed > MASK64:
            raise ValueError(f"seed out of 64-bit range: {seed}")
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, label])))

    def integers(self, n: int) -> int:
        """Uniform integer in ``[0, n)``."""
        if n <= 0:
            raise ValueError("empty range")
        return int(self._gen.integers(n))

    def choice(self, items: Sequence[T]) -> T:
        return items[self.integers(len(items))]

    def normal(self, size=None):
        """Standard normal draw(s): a float, or an ndarray when ``size`` is given."""
        if size is None:
            return float(self._gen.standard_normal())
        return self._gen.standard_normal(size)

    def uniform(self, low: float, high: float, size=None):
        if size is None:
            return float(self._gen.uniform(low, high))
        return self._gen.uniform(low, high, size)

    def seed64(self) -> int:
        """A fresh 64-bit seed, as scattered to agents."""
        return int(self._gen.integers(0, 1 << 64, dtype=np.uint64))

    def permutation(self, n: int) -> list[int]:
        return [int(i) for i in self._gen.permutation(n)]


def derive_stream(seed: int, label: int) -> RngStream:
    """Stream whose draws depend only on ``(seed, label)``."""
    return RngStream(seed, label)
