"""Counter-based deterministic random streams.

Every random quantity in the package is drawn from a `Stream`, a stateless
64-bit counter generator: output k of stream (seed, tag) is

    mix64(key + k * GOLDEN),   key = mix64(seed XOR fnv1a64(tag))

where mix64 is the splitmix64 finalizer.  Identical (seed, tag) pairs give
identical sequences on every platform and thread count; substreams are
derived by extending the tag, never by sharing counters.
"""

from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_FNV_OFFSET = np.uint64(0xCBF29CE484222325)
_FNV_PRIME = np.uint64(0x100000001B3)
_TWO53 = float(2**53)


def mix64(z: np.ndarray | np.uint64) -> np.ndarray | np.uint64:
    """splitmix64 finalizer; accepts scalars or uint64 arrays (wrapping)."""
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def fnv1a64(text: str) -> np.uint64:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return np.uint64(h)


class Stream:
    """One deterministic substream, identified by (seed, tag)."""

    def __init__(self, seed: int, tag: str):
        self.seed = int(seed)
        self.tag = tag
        self.key = mix64(np.uint64(self.seed % 2**64) ^ fnv1a64(tag))
        self.counter = 0

    def substream(self, tag: str) -> "Stream":
        return Stream(self.seed, f"{self.tag}/{tag}")

    def raw(self, count: int) -> np.ndarray:
        idx = np.arange(self.counter, self.counter + count, dtype=np.uint64)
        self.counter += count
        with np.errstate(over="ignore"):
            return mix64(self.key + idx * GOLDEN)

    def uniform(self, count: int) -> np.ndarray:
        """Uniform doubles in [0, 1), 53-bit resolution."""
        return (self.raw(count) >> np.uint64(11)).astype(np.float64) / _TWO53

    def gaussian(self, shape) -> np.ndarray:
        """Standard normals via Box-Muller on consecutive uniform pairs."""
        total = int(np.prod(shape))
        pairs = (total + 1) // 2
        u1 = self.uniform(pairs)
        u2 = self.uniform(pairs)
        u1 = np.maximum(u1, 1.0 / _TWO53)  # keep log() finite
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = 2.0 * np.pi * u2
        z = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])
        return z[:total].reshape(shape)

    def student_t(self, shape, nu: int = 4) -> np.ndarray:
        """Unit-variance Student-t: t_nu / sqrt(nu / (nu - 2))."""
        if nu <= 2:
            raise ValueError("nu must exceed 2 for finite variance")
        total = int(np.prod(shape))
        z = self.gaussian((total,))
        chi2 = np.sum(self.gaussian((nu, total)) ** 2, axis=0)
        t = z / np.sqrt(chi2 / nu)
        return (t / np.sqrt(nu / (nu - 2.0))).reshape(shape)

    def permutation(self, n: int) -> np.ndarray:
        """Deterministic permutation of range(n) (argsort of uniforms)."""
        return np.argsort(self.uniform(n), kind="stable")

    def choice(self, n: int, k: int) -> np.ndarray:
        """k distinct indices from range(n), k <= n."""
        if k > n:
            raise ValueError("cannot draw more indices than available")
        return self.permutation(n)[:k]
