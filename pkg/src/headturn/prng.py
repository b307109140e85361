"""Counter-based hash noise.

Every value is a pure function of ``(seed, tag, counter)``, so results do not
depend on evaluation order or on how a render is split across workers.
"""
from __future__ import annotations

import hashlib

import numpy as np

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def tag_key(tag: str) -> int:
    return int.from_bytes(hashlib.blake2b(tag.encode(), digest_size=8).digest(), "little")


def _mix(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def hash64(seed: int, tag: str, counter) -> np.ndarray:
    """64-bit hash of ``counter`` (any integer array) under ``(seed, tag)``."""
    c = np.asarray(counter, dtype=np.uint64)
    key = _mix(np.array([(seed ^ tag_key(tag)) & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64))[0]
    with np.errstate(over="ignore"):
        return _mix(c * _GOLDEN + key)


def uniform(seed: int, tag: str, counter) -> np.ndarray:
    """Floats in [0, 1) with 53 bits of resolution."""
    return (hash64(seed, tag, counter) >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def normal(seed: int, tag: str, counter) -> np.ndarray:
    """Standard normals by Box-Muller over two decorrelated uniform streams."""
    u1 = 1.0 - uniform(seed, tag + "/u1", counter)  # (0, 1]
    u2 = uniform(seed, tag + "/u2", counter)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
