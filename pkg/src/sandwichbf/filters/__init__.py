"""Approximate-membership filter backends over byte-string keys."""

from __future__ import annotations

from dataclasses import dataclass

from sandwichbf.filters.base import Backend, Filter, round_half_up
from sandwichbf.filters.bloom import BloomFilter
from sandwichbf.filters.codec import deserialize, serialize
from sandwichbf.filters.fingerprint import FingerprintFilter
from sandwichbf.filters.keys import KeyBatch, KeySet
from sandwichbf.filters.mphf import MinimalPerfectHash, build_mphf

__all__ = [
    "Backend",
    "BloomFilter",
    "Filter",
    "FilterConfig",
    "FingerprintFilter",
    "KeyBatch",
    "KeySet",
    "MinimalPerfectHash",
    "alpha",
    "build_filter",
    "build_mphf",
    "deserialize",
    "serialize",
]


@dataclass(frozen=True)
class FilterConfig:
    backend: Backend = Backend.FINGERPRINT_PH
    bits_per_key: float = 8.0
    hash_seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "backend", Backend.parse(self.backend))
        if not self.bits_per_key >= 0:
            raise ValueError(f"bits_per_key must be >= 0, got {self.bits_per_key}")
        if not 0 <= self.hash_seed < 1 << 64:
            raise ValueError("hash_seed must fit in 64 unsigned bits")

    @property
    def alpha(self) -> float:
        return self.backend.alpha


def alpha(backend) -> float:
    return Backend.parse(backend).alpha


def build_filter(keys, config: FilterConfig, *, total_bits: int | None = None) -> Filter:
    """Build a frozen filter over ``keys``.

    The filter gets ``round(bits_per_key * m)`` bits unless ``total_bits``
    is given. An empty key set gives a filter that answers "no" to
    everything; zero bits over a nonempty set gives the always-yes filter.
    """
    if not isinstance(keys, KeySet):
        keys = KeySet(keys)
    if total_bits is None:
        total_bits = round_half_up(config.bits_per_key * len(keys))
    if total_bits < 0:
        raise ValueError(f"total_bits must be >= 0, got {total_bits}")
    h1, h2 = keys.hashes(config.hash_seed)
    if config.backend is Backend.STANDARD_BLOOM:
        return BloomFilter.build(h1, h2, total_bits, config.hash_seed)
    return FingerprintFilter.build(h1, h2, total_bits, config.hash_seed)
