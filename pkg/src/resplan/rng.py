"""Deterministic counter-based random number streams.

Draw k of a stream is a pure function of (seed, k): the 64-bit word for
position k is the splitmix64 finalizer applied to ``seed + (k + 1) * GOLDEN``.
Every draw method consumes exactly one word per output element, so the
counter always advances by the element count regardless of distribution.
Gaussians are the probit transform (inverse normal CDF) of a single uniform.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX_A = np.uint64(0xBF58476D1CE4E5B9)
_MIX_B = np.uint64(0x94D049BB133111EB)
_MASK = 0xFFFFFFFFFFFFFFFF


def _finalize(x: np.ndarray) -> np.ndarray:
    """splitmix64 output scrambler (uint64 arithmetic, wrapping)."""
    x = (x ^ (x >> np.uint64(30))) * _MIX_A
    x = (x ^ (x >> np.uint64(27))) * _MIX_B
    return x ^ (x >> np.uint64(31))


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from arbitrary labels (ints, strings, ...)."""
    text = "\x1f".join(repr(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass
class RngStream:
    """Counter-based stream; distinct instances may run in parallel."""

    seed: int
    counter: int = 0

    def _words(self, count: int) -> np.ndarray:
        base = np.uint64(self.seed & _MASK)
        ks = np.arange(self.counter + 1, self.counter + count + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            words = _finalize(base + ks * _GOLDEN)
        self.counter += count
        return words

    def uniform(self, shape=()) -> np.ndarray:
        """i.i.d. draws strictly inside (0, 1)."""
        shape = _as_shape(shape)
        count = int(np.prod(shape)) if shape else 1
        u = ((self._words(count) >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
        return u.reshape(shape)

    def normal(self, shape=()) -> np.ndarray:
        """i.i.d. standard-normal draws via the probit transform."""
        return ndtri(self.uniform(shape))

    def integers(self, low: int, high: int, shape=()) -> np.ndarray:
        """Uniform ints in [low, high); bias is negligible for high - low << 2**53."""
        if high <= low:
            raise ValueError(f"empty integer range [{low}, {high})")
        return (self.uniform(shape) * (high - low)).astype(np.int64) + low

    def permutation(self, n: int) -> np.ndarray:
        """Deterministic permutation of range(n)."""
        return np.argsort(self.uniform((n,)), kind="stable")

    def spawn(self, *labels) -> "RngStream":
        """Independent child stream keyed by (seed, labels)."""
        return RngStream(derive_seed(self.seed, *labels))


def sample_gaussian(rng: RngStream, shape) -> np.ndarray:
    """Standard-normal tensor of the given nonempty shape."""
    shape = _as_shape(shape)
    if not shape or any(s <= 0 for s in shape):
        raise ValueError(f"shape must be nonempty and positive, got {shape}")
    return rng.normal(shape)


def _as_shape(shape) -> tuple:
    if isinstance(shape, int):
        return (shape,)
    return tuple(int(s) for s in shape)
