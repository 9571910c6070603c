"""Counter-based per-vertex random tapes.

Word ``t`` of vertex ``v`` under master seed ``s`` is a SplitMix64 output,
so any prefix of any vertex's tape can be produced independently of every
other vertex. The global pipeline and the local (LCA) engine both read
randomness from here, which is what makes their outputs comparable.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
MASK64 = (1 << 64) - 1


def mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finaliser over a uint64 array (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def mix_int(x: int) -> int:
    """Scalar version of ``mix64`` on Python ints."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(master: int, *parts: int) -> int:
    """Hash a master seed with extra integers into a 64-bit seed."""
    h = mix_int(int(master) + 0x9E3779B97F4A7C15)
    for p in parts:
        h = mix_int(h ^ ((int(p) + 0x9E3779B97F4A7C15) & MASK64))
    return h


def vertex_keys(seed: int, vertices) -> np.ndarray:
    v = np.asarray(vertices, dtype=np.uint64)
    with np.errstate(over="ignore"):
        base = np.uint64(derive_seed(seed, 0x7A9E))
        return mix64(base ^ mix64(v + GOLDEN))


@lru_cache(maxsize=1 << 16)
def _key(seed: int, v: int) -> np.uint64:
    return vertex_keys(seed, [v])[0]


def words(seed: int, v: int, offset: int, length: int) -> np.ndarray:
    """Tape words ``offset .. offset+length-1`` of vertex ``v``."""
    key = _key(seed, v)
    t = np.arange(offset + 1, offset + length + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(key + t * GOLDEN)


def words_many(seed: int, vertices, offset: int, length: int) -> np.ndarray:
    """Matrix of tape words, one row per vertex."""
    keys = vertex_keys(seed, vertices)
    t = np.arange(offset + 1, offset + length + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(keys[:, None] + t[None, :] * GOLDEN)
