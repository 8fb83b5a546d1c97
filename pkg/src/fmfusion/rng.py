"""Deterministic random stream for initialization, dropout, and shuffling.

Built on the Philox 4x64 counter-based bit generator, keyed directly with the
64-bit seed (no seed hashing). All distributions are derived in-package from
raw counter words, so a given (seed, position) pair reproduces the same
sequence on every platform and numpy build:

  uniform: u = ((raw >> 11) + 1) * 2**-53         one raw word per value
  normal:  Box-Muller on uniform pairs            two raw words per pair

`position` counts consumed raw words. Reconstructing a stream at a position
replays and discards that many words, which is exact regardless of Philox
buffer state.
"""

import numpy as np

_INV_2_53 = 2.0 ** -53
_DISCARD_CHUNK = 1 << 20


class Rng:
    """Seeded Philox stream with an explicit position counter."""

    algorithm = "philox4x64"

    def __init__(self, seed, position=0):
        if not 0 <= int(seed) < 2 ** 64:
            raise ValueError(f"seed must fit in 64 bits, got {seed}")
        if position < 0:
            raise ValueError(f"position must be non-negative, got {position}")
        self.seed = int(seed)
        self.position = 0
        self._bits = np.random.Philox(key=self.seed)
        remaining = int(position)
        while remaining > 0:
            step = min(remaining, _DISCARD_CHUNK)
            self._raw(step)
            remaining -= step

    def _raw(self, n):
        out = self._bits.random_raw(n)
        self.position += n
        return out

    def uniform(self, n):
        """n float64 values in (0, 1], one raw word each."""
        raw = self._raw(int(n))
        return ((raw >> np.uint64(11)) + 1).astype(np.float64) * _INV_2_53

    def normal(self, n):
        """n standard normal float64 values via Box-Muller."""
        n = int(n)
        pairs = (n + 1) // 2
        u1 = self.uniform(pairs)
        u2 = self.uniform(pairs)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])
        return z[:n]

    def permutation(self, n):
        """Fisher-Yates permutation of range(n); consumes max(n - 1, 0) words."""
        n = int(n)
        idx = np.arange(n)
        if n < 2:
            return idx
        u = self.uniform(n - 1)
        for i in range(n - 1, 0, -1):
            j = int(u[n - 1 - i] * (i + 1))  # j in [0, i]; negligible modulo bias
            idx[i], idx[j] = idx[j], idx[i]
        return idx

    def clone(self):
        return Rng(self.seed, self.position)

    def __repr__(self):
        return f"Rng(seed={self.seed}, position={self.position})"
