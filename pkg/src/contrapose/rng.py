"""Deterministic random number generation.

Every stochastic component in the package draws from a SeededRng, a thin
wrapper around numpy's counter-based Philox bit generator. Identical seed and
call sequence produce an identical stream, and independent sub-streams can be
derived from string/integer labels so that e.g. each dataset sequence or each
batch item gets its own reproducible generator regardless of evaluation order.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    """One step of the splitmix64 mixer; spreads label entropy over 64 bits."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


def _fold(seed: int, labels: tuple) -> int:
    h = _splitmix64(seed & _MASK64)
    for label in labels:
        if isinstance(label, str):
            for ch in label.encode("utf-8"):
                h = _splitmix64(h ^ ch)
        else:
            h = _splitmix64(h ^ (int(label) & _MASK64))
    return h


class SeededRng:
    """Counter-based generator with derivable, order-independent sub-streams."""

    def __init__(self, seed: int, _stream: int = 0):
        self.seed = int(seed) & _MASK64
        self._stream = int(_stream) & _MASK64
        key = np.array([self.seed, self._stream], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def derive(self, *labels) -> "SeededRng":
        """Child generator keyed by (seed, labels); independent of call order."""
        return SeededRng(self.seed, _fold(self._stream, labels))

    # Draw helpers: thin passthroughs so call sites stay short.
    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def choice(self, n, size=None, replace=True):
        return self._gen.choice(n, size=size, replace=replace)

    def permutation(self, n):
        return self._gen.permutation(n)
