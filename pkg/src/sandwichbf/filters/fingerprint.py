"""Static fingerprint filter over a minimal perfect hash.

Each build key owns one slot of the perfect hash and stores a short
fingerprint there. A non-member collides with the fingerprint of whatever
slot it hashes to with probability 2**-width, so the false-positive rate
falls as (1/2) per stored bit.

Fractional bit rates are realized with two widths: the first ``n_high``
slots hold ``j_low + 1`` bits, the rest ``j_low`` bits.
"""

from __future__ import annotations

import warnings

import numpy as np

from sandwichbf.filters.base import Backend, Filter
from sandwichbf.filters.mphf import MinimalPerfectHash, build_mphf

MAX_WIDTH = 64


def key_fingerprints(h2: np.ndarray, widths: np.ndarray) -> np.ndarray:
    """Top ``width`` bits of each hash (0 for width 0)."""
    widths = widths.astype(np.uint64)
    shift = np.where(widths > 0, np.uint64(64) - widths, np.uint64(0))
    return np.where(widths > 0, h2 >> shift, np.uint64(0))


def split_widths(total_bits: int, n: int) -> tuple[int, int]:
    """(j_low, n_high) such that n_high * (j_low + 1) + (n - n_high) * j_low == total_bits."""
    if n == 0:
        return 0, 0
    return total_bits // n, total_bits % n


class FingerprintFilter(Filter):
    backend = Backend.FINGERPRINT_PH

    def __init__(
        self,
        mphf: MinimalPerfectHash | None,
        fingerprints: np.ndarray,
        j_low: int,
        n_high: int,
        hash_seed: int,
        n_keys: int,
    ) -> None:
        self.mphf = mphf
        self.fingerprints = np.asarray(fingerprints, dtype=np.uint64)
        self.fingerprints.flags.writeable = False
        self.j_low = int(j_low)
        self.n_high = int(n_high)
        self.hash_seed = int(hash_seed)
        self.n_keys = int(n_keys)

    @classmethod
    def build(cls, h1, h2, total_bits: int, hash_seed: int) -> FingerprintFilter:
        n = len(h1)
        if n and total_bits > MAX_WIDTH * n:
            warnings.warn(
                f"{total_bits / n:.1f} bits per key exceeds the {MAX_WIDTH}-bit fingerprint cap",
                stacklevel=3,
            )
            total_bits = MAX_WIDTH * n
        j_low, n_high = split_widths(total_bits, n)
        if n == 0 or total_bits == 0:
            return cls(None, np.zeros(0, np.uint64), j_low, n_high, hash_seed, n)
        mphf = build_mphf(h1)
        slots = mphf.lookup(h1)
        fps = np.zeros(n, dtype=np.uint64)
        fps[slots] = key_fingerprints(h2, cls._width_of(slots, j_low, n_high))
        return cls(mphf, fps, j_low, n_high, hash_seed, n)

    @staticmethod
    def _width_of(slots: np.ndarray, j_low: int, n_high: int) -> np.ndarray:
        return np.where(slots < n_high, j_low + 1, j_low)

    @property
    def j_high(self) -> int:
        return self.j_low + 1

    @property
    def total_bits(self) -> int:
        return self.n_high * self.j_high + (self.n_keys - self.n_high) * self.j_low

    def model_fpr(self) -> float:
        """Exact expected FPR of the realized width mix."""
        if self.n_keys == 0:
            return 0.0
        n = self.n_keys
        return (self.n_high * 2.0**-self.j_high + (n - self.n_high) * 2.0**-self.j_low) / n

    def _probe(self, h1, h2):
        if self.n_keys == 0:
            return np.zeros(len(h1), dtype=bool)
        if self.mphf is None:
            return np.ones(len(h1), dtype=bool)
        slots = self.mphf.lookup(h1)
        widths = self._width_of(slots, self.j_low, self.n_high)
        return self.fingerprints[slots] == key_fingerprints(h2, widths)

    def packed_fingerprints(self) -> bytes:
        """Fingerprints in slot order, MSB-first, no padding between slots."""
        parts = []
        for lo, hi, w in ((0, self.n_high, self.j_high), (self.n_high, self.n_keys, self.j_low)):
            if hi > lo and w:
                shifts = np.arange(w - 1, -1, -1, dtype=np.uint64)
                bits = (self.fingerprints[lo:hi, None] >> shifts[None, :]) & np.uint64(1)
                parts.append(bits.astype(np.uint8).ravel())
        if not parts:
            return b""
        return np.packbits(np.concatenate(parts)).tobytes()

    @staticmethod
    def unpack_fingerprints(data: bytes, n: int, j_low: int, n_high: int) -> np.ndarray:
        bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
        fps = np.zeros(n, dtype=np.uint64)
        offset = 0
        for lo, hi, w in ((0, n_high, j_low + 1), (n_high, n, j_low)):
            if hi > lo and w:
                block = bits[offset : offset + (hi - lo) * w].reshape(hi - lo, w).astype(np.uint64)
                acc = np.zeros(hi - lo, dtype=np.uint64)
                for col in range(w):
                    acc = (acc << np.uint64(1)) | block[:, col]
                fps[lo:hi] = acc
                offset += (hi - lo) * w
        return fps

    def __repr__(self) -> str:
        return (
            f"FingerprintFilter(n_keys={self.n_keys}, j_low={self.j_low}, "
            f"n_high={self.n_high}, buckets={self.mphf.bucket_count if self.mphf else 0})"
        )
