from __future__ import annotations

import enum
import math

import numpy as np

from sandwichbf.filters.keys import KeyBatch, as_batch


class Backend(enum.IntEnum):
    STANDARD_BLOOM = 0
    FINGERPRINT_PH = 1

    @property
    def alpha(self) -> float:
        """Per-bit false-positive decay rate: FPR ~ alpha ** bits_per_key."""
        if self is Backend.FINGERPRINT_PH:
            return 0.5
        return math.exp(-math.log(2) ** 2)

    @classmethod
    def parse(cls, value) -> "Backend":
        if isinstance(value, Backend):
            return value
        if isinstance(value, str):
            key = value.strip().lower().replace("-", "_")
            aliases = {
                "standard_bloom": cls.STANDARD_BLOOM,
                "standardbloom": cls.STANDARD_BLOOM,
                "bloom": cls.STANDARD_BLOOM,
                "fingerprint_ph": cls.FINGERPRINT_PH,
                "fingerprintph": cls.FINGERPRINT_PH,
                "fingerprint": cls.FINGERPRINT_PH,
                "perfect_hash": cls.FINGERPRINT_PH,
            }
            if key in aliases:
                return aliases[key]
            raise ValueError(f"unknown filter backend {value!r}")
        return cls(int(value))


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


class Filter:
    """Frozen approximate-membership filter. Subclasses implement ``_probe``."""

    backend: Backend
    hash_seed: int
    n_keys: int

    @property
    def total_bits(self) -> int:
        raise NotImplementedError

    @property
    def bits_per_key(self) -> float:
        return self.total_bits / self.n_keys if self.n_keys else 0.0

    def contains(self, key: bytes) -> bool:
        return bool(self.contains_many(KeyBatch([key]))[0])

    def contains_many(self, keys) -> np.ndarray:
        batch = as_batch(keys)
        if not len(batch):
            return np.zeros(0, dtype=bool)
        h1, h2 = batch.hashes(self.hash_seed)
        return self._probe(h1, h2)

    def _probe(self, h1: np.ndarray, h2: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __contains__(self, key: bytes) -> bool:
        return self.contains(key)

    def to_bytes(self) -> bytes:
        from sandwichbf.filters.codec import serialize

        return serialize(self)
