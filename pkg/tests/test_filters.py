import math
import struct
import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import binomial_sigma, random_batch, random_keyset
from sandwichbf.errors import BadMagic, ChecksumMismatch, FormatError, TrailingBytes, Truncated, UnknownVersion
from sandwichbf.filters import (
    Backend,
    BloomFilter,
    FilterConfig,
    FingerprintFilter,
    KeySet,
    alpha,
    build_filter,
    deserialize,
    serialize,
)
from sandwichbf.filters.bloom import optimal_hash_count

BACKENDS = list(Backend)


class TestConfig:
    def test_alpha_values(self):
        assert alpha(Backend.FINGERPRINT_PH) == 0.5
        assert alpha("bloom") == pytest.approx(math.exp(-math.log(2) ** 2))
        assert alpha("bloom") == pytest.approx(0.6185, abs=1e-4)

    def test_negative_bits_rejected(self):
        with pytest.raises(ValueError):
            FilterConfig(Backend.STANDARD_BLOOM, -0.5)

    def test_backend_parsing(self):
        assert FilterConfig("fingerprint").backend is Backend.FINGERPRINT_PH
        assert FilterConfig(0).backend is Backend.STANDARD_BLOOM
        with pytest.raises(ValueError):
            Backend.parse("cuckoo")


class TestBuild:
    def test_two_keys_at_eight_bits(self):
        f = build_filter(KeySet([b"a", b"b"]), FilterConfig(Backend.STANDARD_BLOOM, 8.0))
        assert isinstance(f, BloomFilter)
        assert f.n_bits == 16
        assert f.contains(b"a") and f.contains(b"b")

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_zero_bits_is_always_yes(self, backend):
        f = build_filter(random_keyset(50), FilterConfig(backend, 0.0))
        assert f.total_bits == 0
        assert f.contains_many(random_batch(1000)).all()

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_empty_set_answers_no(self, backend):
        f = build_filter(KeySet([]), FilterConfig(backend, 8.0), total_bits=0)
        assert not f.contains_many(random_batch(100)).any()

    @pytest.mark.parametrize("backend", BACKENDS)
    @pytest.mark.parametrize("bpk", [0.3, 1.0, 2.5, 7.25, 8.0, 13.9])
    def test_total_bits_is_rounded_budget(self, backend, bpk):
        keys = random_keyset(777)
        f = build_filter(keys, FilterConfig(backend, bpk, 5))
        assert f.total_bits == math.floor(bpk * 777 + 0.5)
        assert f.contains_many(keys).all()

    def test_hash_count_rule(self):
        assert optimal_hash_count(800, 100) == 6  # ln2 * 8 = 5.55
        assert optimal_hash_count(1, 1000) == 1
        assert optimal_hash_count(10**6, 1) == 64

    def test_fingerprint_width_split(self):
        f = build_filter(random_keyset(1000), FilterConfig(Backend.FINGERPRINT_PH, 4.6853))
        assert (f.j_low, f.j_high) == (4, 5)
        assert f.n_high == 685
        assert abs(f.total_bits / 1000 - 4.6853) < 1.0 / 1000

    def test_fingerprint_width_cap(self):
        keys = random_keyset(10)
        with pytest.warns(UserWarning, match="cap"):
            f = build_filter(keys, FilterConfig(Backend.FINGERPRINT_PH, 100.0))
        assert f.j_low == 64 and f.contains_many(keys).all()


def _fractional_model(bpk: float, n: int = 10**6) -> float:
    j = math.floor(bpk)
    hi = math.floor((bpk - j) * n + 0.5)
    return (hi * 2.0 ** -(j + 1) + (n - hi) * 2.0**-j) / n


class TestFractionalBits:
    def test_model_within_ten_percent_everywhere(self):
        # dense scan of [2, 16]; analytic worst case is (1 - f/2) 2^f ~ 1.0613 at f ~ 0.557
        worst = max(
            _fractional_model(b) / 2.0**-b - 1 for b in np.linspace(2, 16, 14001)
        )
        assert worst < 0.10
        assert worst == pytest.approx(0.0613, abs=5e-4)

    def test_filter_reports_realized_model(self):
        f = build_filter(random_keyset(2000), FilterConfig(Backend.FINGERPRINT_PH, 6.63))
        n_high = round(0.63 * 2000)
        assert f.model_fpr() == pytest.approx((n_high * 2**-7 + (2000 - n_high) * 2**-6) / 2000)


class TestNoFalseNegatives:
    @pytest.mark.parametrize("backend", BACKENDS)
    @pytest.mark.parametrize("m", [1, 10, 1000])
    @pytest.mark.parametrize("bpk", [0.5, 2.0, 8.0])
    def test_exhaustive(self, backend, m, bpk):
        keys = random_keyset(m, seed=m)
        f = build_filter(keys, FilterConfig(backend, bpk, 17))
        assert f.contains_many(keys).all()
        assert all(f.contains(k) for k in keys.keys[:50])

    @given(
        st.sets(st.binary(min_size=1, max_size=24), min_size=1, max_size=60),
        st.sampled_from(BACKENDS),
        st.floats(0, 20),
        st.integers(0, 2**64 - 1),
    )
    @settings(max_examples=60, deadline=None)
    def test_property(self, keys, backend, bpk, seed):
        ks = KeySet(sorted(keys))
        f = build_filter(ks, FilterConfig(backend, bpk, seed))
        assert f.contains_many(ks).all()


class TestFalsePositiveRate:
    def test_fingerprint_eight_bits(self, positives_100k, negatives_1m):
        f = build_filter(positives_100k, FilterConfig(Backend.FINGERPRINT_PH, 8.0, 1))
        rate = f.contains_many(negatives_1m).mean()
        p = 2.0**-8
        assert abs(rate - p) <= 3 * binomial_sigma(p, 10**6)

    def test_bloom_eight_bits(self, positives_100k, negatives_1m):
        f = build_filter(positives_100k, FilterConfig(Backend.STANDARD_BLOOM, 8.0, 1))
        rate = f.contains_many(negatives_1m).mean()
        p = alpha("bloom") ** 8
        assert abs(rate - p) <= 0.15 * p + 3 * binomial_sigma(p, 10**6)

    def test_fractional_fingerprint_matches_realized_model(self, positives_100k, negatives_1m):
        f = build_filter(positives_100k, FilterConfig(Backend.FINGERPRINT_PH, 4.6853, 2))
        rate = f.contains_many(negatives_1m).mean()
        p = f.model_fpr()
        assert abs(rate - p) <= 3 * binomial_sigma(p, 10**6)


class TestSerialization:
    @pytest.mark.parametrize("backend", BACKENDS)
    @pytest.mark.parametrize("bpk", [0.0, 0.7, 5.0, 9.5])
    def test_round_trip(self, backend, bpk):
        keys = random_keyset(3000, seed=3)
        f = build_filter(keys, FilterConfig(backend, bpk, 42))
        g = deserialize(serialize(f))
        probes = random_batch(10_000, seed=4)
        assert np.array_equal(f.contains_many(probes), g.contains_many(probes))
        assert g.contains_many(keys).all()
        assert serialize(g) == serialize(f)

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_deterministic_bytes(self, backend):
        a = serialize(build_filter(random_keyset(2000, seed=8), FilterConfig(backend, 6.3, 9)))
        b = serialize(build_filter(random_keyset(2000, seed=8), FilterConfig(backend, 6.3, 9)))
        assert a == b
        c = serialize(build_filter(random_keyset(2000, seed=8), FilterConfig(backend, 6.3, 10)))
        assert a != c

    def test_bloom_layout(self):
        f = build_filter(KeySet([b"a", b"b", b"c"]), FilterConfig(Backend.STANDARD_BLOOM, 30.0, 7))
        data = serialize(f)
        assert data[:4] == b"SBFL"
        version, backend, seed, n = struct.unpack_from("<BBQQ", data, 4)
        assert (version, backend, seed, n) == (1, 0, 7, 3)
        n_bits, k = struct.unpack_from("<QB", data, 22)
        assert (n_bits, k) == (90, f.k)
        words = np.frombuffer(data[31:31 + 16], dtype="<u8")
        for i in np.flatnonzero(f.bits):
            assert (int(words[i // 64]) >> (i % 64)) & 1
        assert len(data) == 31 + 16 + 4
        assert struct.unpack("<I", data[-4:])[0] == zlib.crc32(data[:-4])

    def test_fingerprint_layout(self):
        keys = random_keyset(10, seed=2)
        f = build_filter(keys, FilterConfig(Backend.FINGERPRINT_PH, 3.3, 1))
        data = serialize(f)
        assert struct.unpack_from("<BB", data, 4) == (1, 1)
        j_low, n_high, buckets = struct.unpack_from("<BQQ", data, 22)
        assert (j_low, n_high, buckets) == (3, 3, f.mphf.bucket_count)
        seeds = np.frombuffer(data[39:39 + 2 * buckets], dtype="<u2")
        assert np.array_equal(seeds, f.mphf.seeds)
        packed = data[39 + 2 * buckets:-4]
        bits = "".join(f"{b:08b}" for b in packed)
        expected = "".join(f"{int(v):04b}" for v in f.fingerprints[:3]) + "".join(
            f"{int(v):03b}" for v in f.fingerprints[3:]
        )
        assert bits[: len(expected)] == expected
        assert len(packed) == math.ceil(33 / 8)

    def _blob(self):
        return serialize(build_filter(random_keyset(100), FilterConfig(Backend.FINGERPRINT_PH, 8.0)))

    def test_bad_magic(self):
        data = bytearray(self._blob())
        data[0] ^= 0xFF
        with pytest.raises(BadMagic) as exc:
            deserialize(bytes(data))
        assert exc.value.code == "bad_magic"

    def test_empty_payload_truncated(self):
        with pytest.raises(Truncated) as exc:
            deserialize(b"")
        assert exc.value.code == "truncated"

    @pytest.mark.parametrize("cut", [5, 20, 40, -1])
    def test_truncated(self, cut):
        with pytest.raises(Truncated):
            deserialize(self._blob()[:cut])

    def test_unknown_version(self):
        data = bytearray(self._blob())
        data[4] = 2
        with pytest.raises(UnknownVersion):
            deserialize(bytes(data))

    def test_checksum(self):
        data = bytearray(self._blob())
        data[-10] ^= 0x01
        with pytest.raises(ChecksumMismatch):
            deserialize(bytes(data))

    def test_trailing(self):
        with pytest.raises(TrailingBytes):
            deserialize(self._blob() + b"\x00")

    def test_error_codes_distinct(self):
        codes = {c.code for c in (BadMagic, UnknownVersion, Truncated, ChecksumMismatch, TrailingBytes)}
        assert len(codes) == 5
        assert all(issubclass(c, FormatError) for c in (BadMagic, Truncated))


def test_filters_are_frozen():
    f = build_filter(random_keyset(100), FilterConfig(Backend.FINGERPRINT_PH, 8.0))
    with pytest.raises(ValueError):
        f.fingerprints[0] = 1
    g = build_filter(random_keyset(100), FilterConfig(Backend.STANDARD_BLOOM, 8.0))
    with pytest.raises(ValueError):
        g.bits[0] = True


def test_concurrent_readers_agree():
    from concurrent.futures import ThreadPoolExecutor

    f = build_filter(random_keyset(5000), FilterConfig(Backend.FINGERPRINT_PH, 6.0))
    probes = random_batch(40_000, seed=9)
    expected = f.contains_many(probes)
    chunks = [probes[i:i + 5000] for i in range(0, 40_000, 5000)]
    with ThreadPoolExecutor(4) as pool:
        got = np.concatenate(list(pool.map(f.contains_many, chunks)))
    assert np.array_equal(got, expected)


def test_fingerprint_filter_type():
    f = build_filter(random_keyset(10), FilterConfig(Backend.FINGERPRINT_PH, 8.0))
    assert isinstance(f, FingerprintFilter)
