"""Stateless uniform-variate generation from (seed, key) pairs.

Every random quantity in the package is a pure function of a 64-bit seed and
an integer key sequence, obtained by chaining a splitmix64-style finalizer.
This gives reproducible, lock-free environments: querying the same edge or
vertex twice returns the identical bit pattern, and independent replicas are
derived by re-keying the seed rather than by consuming shared RNG state.
"""
from __future__ import annotations

from typing import Iterable

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# 53-bit mantissa scaling: values lie in [0, 1 - 2^-53]
_TO_UNIT = 2.0**-53


def mix64(z: int) -> int:
    """splitmix64 finalizer on a 64-bit integer (Python-int version)."""
    z = (z + _GAMMA) & _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def hash_chain(seed: int, key: Iterable[int]) -> int:
    """Chain the finalizer over ``seed`` followed by each key integer.

    Negative key integers are encoded by two's complement in 64 bits.
    """
    h = mix64(seed & _MASK)
    for v in key:
        h = mix64((h ^ (v & _MASK)) & _MASK)
    return h


def to_unit(h: int) -> float:
    """Map a 64-bit hash to a uniform float in [0, 1)."""
    return (h >> 11) * _TO_UNIT


def uniform(seed: int, key: Iterable[int]) -> float:
    """Uniform [0,1) variate attached to an integer key sequence."""
    return to_unit(hash_chain(seed, key))


def derive_seed(seed: int, index: int, tag: int = 1) -> int:
    """Seed for replica ``index`` of a run; tag separates seed families."""
    return hash_chain(seed, (tag, index))


# ---------------------------------------------------------------------------
# Vectorized counterparts (bit-identical to the scalar path)
# ---------------------------------------------------------------------------

_U64 = np.uint64


def mix64_array(z: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer applied elementwise to a uint64 array."""
    z = z + _U64(_GAMMA)
    z = (z ^ (z >> _U64(30))) * _U64(_MIX1)
    z = (z ^ (z >> _U64(27))) * _U64(_MIX2)
    return z ^ (z >> _U64(31))


def hash_chain_arrays(seed: int, key_columns: list[np.ndarray]) -> np.ndarray:
    """Vectorized ``hash_chain``: one key integer per column, row-wise chains."""
    h0 = mix64(seed & _MASK)
    n = len(key_columns[0]) if key_columns else 1
    h = np.full(n, h0, dtype=np.uint64)
    for col in key_columns:
        h = mix64_array(h ^ col.astype(np.int64).view(np.uint64))
    return h


def to_unit_array(h: np.ndarray) -> np.ndarray:
    return (h >> _U64(11)).astype(np.float64) * _TO_UNIT


def uniform_array(seed: int, key_columns: list[np.ndarray]) -> np.ndarray:
    """Uniform [0,1) variates for many key sequences at once."""
    return to_unit_array(hash_chain_arrays(seed, key_columns))
