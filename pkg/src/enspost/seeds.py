"""Deterministic seed derivation for independent random streams.

Every stochastic component (synthetic weather, per-slice model training,
per-cell forcing perturbations) draws from a stream seeded by a 64-bit
hash of (base seed, integer tags). Streams for different tags are
independent and reproducible regardless of evaluation order.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def splitmix64(z: int) -> int:
    """One avalanche step of the splitmix64 finalizer."""
    z = (z + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def derive_seed(base: int, *tags: int) -> int:
    """Mix a base seed with integer tags into a new 64-bit seed.

    Chained splitmix64 over the tag sequence; distinct tag tuples give
    unrelated seeds.
    """
    h = splitmix64(base & _MASK64)
    for t in tags:
        h = splitmix64(h ^ (t & _MASK64))
    return h


def derive_seed_array(base: int, *tag_arrays: np.ndarray) -> np.ndarray:
    """Vectorized derive_seed over broadcastable integer tag arrays."""
    with np.errstate(over="ignore"):
        golden = np.uint64(_GOLDEN)
        m1 = np.uint64(_MIX1)
        m2 = np.uint64(_MIX2)

        def mix(z: np.ndarray) -> np.ndarray:
            z = z + golden
            z = (z ^ (z >> np.uint64(30))) * m1
            z = (z ^ (z >> np.uint64(27))) * m2
            return z ^ (z >> np.uint64(31))

        h = mix(np.asarray(np.uint64(base & _MASK64)))
        for t in tag_arrays:
            h = mix(h ^ np.asarray(t, dtype=np.uint64))
        return h


def uniform_open01(z: np.ndarray) -> np.ndarray:
    """Map 64-bit words to doubles strictly inside (0, 1)."""
    z = np.asarray(z, dtype=np.uint64)
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def rng_for(base: int, *tags: int) -> np.random.Generator:
    """A fresh, reproducible generator for the given (base, tags)."""
    return np.random.default_rng(derive_seed(base, *tags))
