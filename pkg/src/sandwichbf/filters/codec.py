"""Bit-exact filter serialization ("SBFL", version 1, little-endian).

    magic "SBFL" | version u8 | backend u8 | hash_seed u64 | n_keys u64
    Bloom:        L u64 | k u8 | ceil(L/64) u64 words (bit i = bit i%64 of word i//64)
    Fingerprint:  j_low u8 | n_high u64 | buckets u64 | buckets x u16 seeds
                  | fingerprints packed MSB-first in slot order
    CRC32 of everything above, u32
"""

from __future__ import annotations

import numpy as np

from sandwichbf._binfmt import Reader, Writer
from sandwichbf.errors import FormatError
from sandwichbf.filters.base import Backend, Filter
from sandwichbf.filters.bloom import BloomFilter
from sandwichbf.filters.fingerprint import FingerprintFilter
from sandwichbf.filters.mphf import MinimalPerfectHash

MAGIC = b"SBFL"
VERSION = 1


def serialize(f: Filter) -> bytes:
    w = Writer(MAGIC, VERSION)
    w.u8(int(f.backend))
    w.u64(f.hash_seed)
    w.u64(f.n_keys)
    if isinstance(f, BloomFilter):
        w.u64(f.n_bits)
        w.u8(f.k)
        n_words = -(-f.n_bits // 64)
        padded = np.zeros(n_words * 64, dtype=bool)
        padded[: f.n_bits] = f.bits
        w.raw(np.packbits(padded, bitorder="little").tobytes())
    elif isinstance(f, FingerprintFilter):
        w.u8(f.j_low)
        w.u64(f.n_high)
        seeds = f.mphf.seeds if f.mphf is not None else np.zeros(0, np.uint16)
        w.u64(len(seeds))
        w.raw(seeds.astype("<u2").tobytes())
        w.raw(f.packed_fingerprints())
    else:
        raise TypeError(f"cannot serialize {type(f).__name__}")
    return w.finish()


def deserialize(data: bytes) -> Filter:
    r = Reader(data, MAGIC, (VERSION,))
    backend_code = r.u8()
    try:
        backend = Backend(backend_code)
    except ValueError:
        raise FormatError(f"unknown backend code {backend_code}") from None
    seed = r.u64()
    n = r.u64()
    if backend is Backend.STANDARD_BLOOM:
        n_bits = r.u64()
        k = r.u8()
        words = r.raw(-(-n_bits // 64) * 8)
        r.finish()
        bits = np.unpackbits(np.frombuffer(words, dtype=np.uint8), bitorder="little")[:n_bits]
        return BloomFilter(bits.astype(bool), k, seed, n)
    j_low = r.u8()
    n_high = r.u64()
    n_buckets = r.u64()
    seeds = np.frombuffer(r.raw(2 * n_buckets), dtype="<u2").astype(np.uint16)
    if n_high > n:
        raise FormatError(f"n_high {n_high} exceeds n_keys {n}")
    total = n_high * (j_low + 1) + (n - n_high) * j_low
    packed = r.raw(-(-total // 8))
    r.finish()
    mphf = MinimalPerfectHash(n, seeds) if n_buckets else None
    if mphf is None and n and total:
        raise FormatError("fingerprint payload without a perfect hash")
    fps = FingerprintFilter.unpack_fingerprints(packed, n, j_low, n_high)
    return FingerprintFilter(mphf, fps, j_low, n_high, seed, n)
