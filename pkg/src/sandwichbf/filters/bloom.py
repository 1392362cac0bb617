"""Standard Bloom filter with double hashing (h1 + i*h2)."""

from __future__ import annotations

import math

import numpy as np

from sandwichbf.filters.base import Backend, Filter

MAX_HASHES = 64


def optimal_hash_count(n_bits: int, n_keys: int) -> int:
    if n_keys == 0 or n_bits == 0:
        return 1
    k = int(math.floor(math.log(2) * n_bits / n_keys + 0.5))
    return min(MAX_HASHES, max(1, k))


def _indices(h1: np.ndarray, h2: np.ndarray, n_bits: int, k: int):
    size = np.uint64(n_bits)
    a = h1 % size
    b = h2 % size
    for i in range(k):
        yield (a + np.uint64(i) * b) % size


class BloomFilter(Filter):
    backend = Backend.STANDARD_BLOOM

    def __init__(self, bits: np.ndarray, k: int, hash_seed: int, n_keys: int) -> None:
        self.bits = np.asarray(bits, dtype=bool)
        self.bits.flags.writeable = False
        self.k = int(k)
        self.hash_seed = int(hash_seed)
        self.n_keys = int(n_keys)

    @classmethod
    def build(cls, h1: np.ndarray, h2: np.ndarray, n_bits: int, hash_seed: int) -> BloomFilter:
        n = len(h1)
        k = optimal_hash_count(n_bits, n)
        bits = np.zeros(n_bits, dtype=bool)
        if n_bits and n:
            for idx in _indices(h1, h2, n_bits, k):
                bits[idx] = True
        return cls(bits, k, hash_seed, n)

    @property
    def n_bits(self) -> int:
        return len(self.bits)

    @property
    def total_bits(self) -> int:
        return self.n_bits

    def _probe(self, h1, h2):
        if self.n_bits == 0:
            # zero bits: always-yes, unless there is nothing to remember
            return np.full(len(h1), self.n_keys > 0)
        hit = np.ones(len(h1), dtype=bool)
        for idx in _indices(h1, h2, self.n_bits, self.k):
            hit &= self.bits[idx]
        return hit

    def __repr__(self) -> str:
        return f"BloomFilter(n_keys={self.n_keys}, n_bits={self.n_bits}, k={self.k})"
