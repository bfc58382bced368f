"""Random-number plumbing for the round simulator."""

from __future__ import annotations

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based 64-bit generator (Philox) seeded explicitly."""
    return np.random.Generator(np.random.Philox(int(seed)))


class UniformStream:
    """Buffered U[0, 1) draws from a generator.

    Drawing scalars one at a time from numpy is dominated by call overhead;
    pulling blocks keeps the per-round cost low while remaining a pure
    function of the generator state.
    """

    def __init__(self, rng: np.random.Generator, block: int = 4096):
        self.rng = rng
        self.block = block
        self._buf: list[float] = []
        self._pos = 0

    def __call__(self) -> float:
        if self._pos >= len(self._buf):
            self._buf = self.rng.random(self.block).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u


class AliasTable:
    """Walker/Vose alias table: O(1) draws from a fixed discrete distribution."""

    def __init__(self, weights):
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1 or w.size == 0 or np.any(w < 0) or not np.any(w > 0):
            raise ValueError("weights must be a non-empty non-negative vector with positive mass")
        n = w.size
        scaled = (w / w.sum() * n).tolist()
        prob = [1.0] * n
        alias = list(range(n))
        small = [i for i, p in enumerate(scaled) if p < 1.0]
        large = [i for i, p in enumerate(scaled) if p >= 1.0]
        while small and large:
            s, g = small.pop(), large.pop()
            prob[s] = scaled[s]
            alias[s] = g
            scaled[g] = scaled[g] + scaled[s] - 1.0
            (small if scaled[g] < 1.0 else large).append(g)
        # leftovers are 1 up to rounding
        for i in small + large:
            prob[i] = 1.0
        self.prob = prob
        self.alias = alias
        self.n = n

    def sample(self, u: float) -> int:
        """Map one uniform draw to an outcome (column from the integer part)."""
        x = u * self.n
        col = int(x)
        if col >= self.n:
            col = self.n - 1
        return col if (x - col) < self.prob[col] else self.alias[col]

    def probabilities(self) -> np.ndarray:
        p = np.array(self.prob) / self.n
        out = p.copy()
        for i, a in enumerate(self.alias):
            out[a] += (1.0 - self.prob[i]) / self.n
        return out


def replica_rng(seed: int, replica: int) -> np.random.Generator:
    """Independent stream for replica ``replica`` of a run seeded with ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(replica)])))
