"""Counter-based random streams.

Raw 64-bit words come from Philox keyed by (seed, stream id); every
derived draw (uniforms, normals, integers, permutations) is a fixed
arithmetic transform of those words, so a stream replays identically on
any platform and numpy version that keeps Philox stable.
"""
from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_TWO_POW_M53 = 2.0 ** -53


class RngStream:
    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream = int(stream) & _MASK64
        self._bits = np.random.Philox(key=np.array([self.seed, self.stream], dtype=np.uint64))
        self.counter = 0

    def raw(self, n):
        self.counter += n
        return np.asarray(self._bits.random_raw(n), dtype=np.uint64)

    def uniform(self, size=None):
        """Uniform draws on the open interval (0, 1)."""
        n = 1 if size is None else int(np.prod(size))
        words = self.raw(n) >> np.uint64(11)
        u = (words.astype(np.float64) + 0.5) * _TWO_POW_M53
        return float(u[0]) if size is None else u.reshape(size)

    def normal(self, size=None, loc=0.0, scale=1.0):
        """Standard normals by the Box-Muller transform of paired uniforms."""
        n = 1 if size is None else int(np.prod(size))
        half = (n + 1) // 2
        u = self.uniform(2 * half)
        r = np.sqrt(-2.0 * np.log(u[:half]))
        theta = 2.0 * np.pi * u[half:]
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        z = loc + scale * z
        return float(z[0]) if size is None else z.reshape(size)

    def integers(self, low, high, size=None):
        """Integers in [low, high] inclusive."""
        span = high - low + 1
        u = self.uniform(1 if size is None else size)
        out = low + np.minimum(np.floor(np.asarray(u) * span), span - 1).astype(np.int64)
        return int(out.ravel()[0]) if size is None else out

    def permutation(self, n):
        return np.argsort(self.uniform(n), kind="stable")

    def choice(self, n, k):
        """``k`` distinct indices from ``range(n)``."""
        if k > n:
            raise ValueError(f"cannot choose {k} of {n} without replacement")
        return self.permutation(n)[:k]


def seeded_rng(seed, stream=0) -> RngStream:
    return RngStream(seed, stream)
