"""Counter-based deterministic random number generation.

Every variate is a pure function of (seed, stream, step, element indices),
so draws can be reproduced, sliced, and parallelized without carrying
generator state: pixel (i, j) of the noise field for step k is the same
number no matter how large the field is or which worker computes it.

The core is a splitmix64-style avalanche mix applied to a chain of
absorbed words; uniforms are mapped to normals through the inverse CDF.
"""

from __future__ import annotations

import hashlib

import numpy as np
from scipy.special import ndtri

_MASK = 0xFFFFFFFFFFFFFFFF
_GAMMA = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB


def _mix_int(x: int) -> int:
    """splitmix64 finalizer on a Python int (no numpy scalar overflow warnings)."""
    x &= _MASK
    x = ((x ^ (x >> 30)) * _MUL1) & _MASK
    x = ((x ^ (x >> 27)) * _MUL2) & _MASK
    return x ^ (x >> 31)


def _mix_array(x: np.ndarray) -> np.ndarray:
    x = (x ^ (x >> np.uint64(30))) * np.uint64(_MUL1)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(_MUL2)
    return x ^ (x >> np.uint64(31))


def _absorb(state: np.ndarray, word: np.ndarray) -> np.ndarray:
    return _mix_array(state + np.uint64(_GAMMA) + word)


class CounterRng:
    """Deterministic counter-based generator.

    `seed` selects the overall stream; `stream` is a label that decorrelates
    independent uses of the same seed (sampler noise, mask geometry, corpus
    synthesis). `step` is the draw counter: explicit for callers that index
    draws (the reverse sampler uses its step number), or taken from an
    internal counter that advances once per call.
    """

    def __init__(self, seed: int, stream: str = "noise"):
        tag = hashlib.blake2b(stream.encode("utf-8"), digest_size=8).digest()
        self.seed = int(seed)
        self.stream = stream
        self._key = _mix_int(_mix_int(self.seed) ^ int.from_bytes(tag, "little"))
        self._calls = 0

    def _take_step(self, step: int | None) -> int:
        if step is None:
            step = self._calls
            self._calls += 1
        return int(step)

    def _words(self, shape: tuple[int, ...], step: int) -> np.ndarray:
        if not 1 <= len(shape) <= 3:
            raise ValueError(f"shape must have 1..3 axes, got {shape}")
        axes = np.indices(shape, dtype=np.uint64)
        state = np.full(shape, _mix_int(self._key + _GAMMA + (step & _MASK)) & _MASK,
                        dtype=np.uint64)
        with np.errstate(over="ignore"):
            for axis in axes:
                state = _absorb(state, axis)
        return state

    def uniform_field(self, shape: tuple[int, ...], step: int | None = None) -> np.ndarray:
        """Uniforms in the open interval (0, 1), one per element of `shape`."""
        words = self._words(tuple(shape), self._take_step(step))
        # 53 high bits, offset half an ulp so 0.0 and 1.0 are never produced.
        return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53

    def normal_field(self, shape: tuple[int, ...], step: int | None = None) -> np.ndarray:
        """Standard normal variates via the inverse CDF of `uniform_field`."""
        return ndtri(self.uniform_field(shape, step=step))

    def integers(self, low: int, high: int, shape: tuple[int, ...],
                 step: int | None = None) -> np.ndarray:
        """Integers in [low, high), floor-mapped from uniforms."""
        if high <= low:
            raise ValueError("empty integer range")
        u = self.uniform_field(shape, step=step)
        return low + np.minimum((u * (high - low)).astype(np.int64), high - low - 1)


class ZeroRng:
    """Stub generator that emits zero noise; useful for mean-path runs."""

    def uniform_field(self, shape, step=None):
        return np.full(tuple(shape), 0.5)

    def normal_field(self, shape, step=None):
        return np.zeros(tuple(shape))
