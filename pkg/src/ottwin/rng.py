"""Deterministic random numbers for simulation runs.

Counter-based Philox underneath: the same 64-bit seed yields the same stream
on every platform and numpy build, which is what makes trial replay
byte-exact. Draw ORDER is part of the contract — the stepper draws one batch
per tick in a fixed layout — so nothing outside the stepper may pull from a
world's generator.
"""

from __future__ import annotations

import numpy as np

ALGORITHM = "philox4x64"

_UINT64_MASK = (1 << 64) - 1


class SimRng:
    """Seeded Gaussian source with a stable, replayable stream."""

    def __init__(self, seed: int):
        if not isinstance(seed, int):
            raise TypeError(f"seed must be an int, got {type(seed).__name__}")
        if not (0 <= seed <= _UINT64_MASK):
            raise ValueError(f"seed must fit in uint64, got {seed}")
        self.seed = seed
        self.algorithm = ALGORITHM
        self._gen = np.random.Generator(np.random.Philox(key=seed))

    def standard_normal(self, n: int) -> np.ndarray:
        """Batch of ``n`` independent N(0,1) draws."""
        return self._gen.standard_normal(n)

    def normal_scalar(self) -> float:
        """Single N(0,1) draw; stream-equivalent to a batch of one."""
        return float(self._gen.standard_normal())

    def spawn(self, stream: int) -> "SimRng":
        """Independent generator for a derived stream (e.g. trial index)."""
        return SimRng((self.seed + stream) & _UINT64_MASK)

    def __repr__(self) -> str:
        return f"SimRng(seed={self.seed}, algorithm={self.algorithm!r})"
