"""Keyed 128-bit hashing of byte-string keys, vectorized with numpy.

Keys of equal length are hashed together as rows of a uint64 word matrix,
so a batch of a million 16-byte keys costs a few numpy passes instead of a
million digest calls. The result depends only on (key bytes, seed): hashing
a key alone or inside any batch gives the same value.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

_C1 = 0x9E3779B97F4A7C15
_C2 = 0xC2B2AE3D27D4EB4F
_C3 = 0x165667B19E3779F9
_C4 = 0x27D4EB2F165667C5


def splitmix64(x: int) -> int:
    """Scalar splitmix64 finalizer, used to derive seeds."""
    x = (x + _C1) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def fmix64(x: np.ndarray) -> np.ndarray:
    """murmur3 64-bit finalizer over a uint64 array (returns a new array)."""
    x = x ^ (x >> np.uint64(33))
    x = x * np.uint64(0xFF51AFD7ED558CCD)
    x = x ^ (x >> np.uint64(33))
    x = x * np.uint64(0xC4CEB9FE1A85EC53)
    return x ^ (x >> np.uint64(33))


def _rotl(x: np.ndarray, r: int) -> np.ndarray:
    return (x << np.uint64(r)) | (x >> np.uint64(64 - r))


def hash_words(words: np.ndarray, length: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Hash rows of a (n, W) uint64 matrix holding keys of ``length`` bytes."""
    n = words.shape[0]
    a0 = splitmix64(seed ^ (length * _C3 & MASK64))
    b0 = splitmix64(a0 ^ _C2)
    with np.errstate(over="ignore"):
        a = np.full(n, a0, dtype=np.uint64)
        b = np.full(n, b0, dtype=np.uint64)
        for w in range(words.shape[1]):
            x = words[:, w]
            a = fmix64(a ^ x)
            b = fmix64(b + x * np.uint64(_C4))
        h1 = fmix64(a ^ _rotl(b, 29))
        h2 = fmix64(b + a * np.uint64(_C1))
    return h1, h2


def pack_rows(rows: np.ndarray) -> np.ndarray:
    """Zero-pad an (n, L) uint8 matrix to whole 8-byte words; view as uint64."""
    n, length = rows.shape
    width = max(1, -(-length // 8)) * 8
    if width != length:
        padded = np.zeros((n, width), dtype=np.uint8)
        padded[:, :length] = rows
        rows = padded
    return np.ascontiguousarray(rows).view("<u8")
