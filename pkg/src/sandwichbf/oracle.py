"""Learned-function oracles: a score in [0, 1] plus a threshold tau.

An oracle says "member" when ``score(key) >= tau``. Two concrete oracles:

* ``SyntheticOracle`` hits a requested (f_p, f_n) exactly by construction,
  using keyed-hash thresholds. It is what the benchmarks use to reproduce
  the analytic model.
* ``ScoreOracle`` is a small byte-bigram log-odds classifier trained on
  positive and negative examples.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import numpy as np

from sandwichbf._binfmt import Reader, Writer
from sandwichbf._hashing import splitmix64
from sandwichbf.errors import BadMagic, Truncated
from sandwichbf.filters.keys import KeyBatch, KeySet, as_batch

SYNTHETIC_MAGIC = b"SYNO"
SCORE_MAGIC = b"SORC"


@dataclass(frozen=True)
class OracleProfile:
    f_p: float
    f_n: float
    size_bits: int = 0
    false_negatives: int = 0
    m: int = 0

    def __post_init__(self) -> None:
        if not (0.0 <= self.f_p <= 1.0 and 0.0 <= self.f_n <= 1.0):
            raise ValueError(f"f_p and f_n must lie in [0, 1], got ({self.f_p}, {self.f_n})")


class Oracle:
    """Base class. Subclasses implement ``scores``."""

    tau: float = 0.5
    size_bits: int = 0

    def scores(self, keys) -> np.ndarray:
        raise NotImplementedError

    def score(self, key: bytes) -> float:
        return float(self.scores(KeyBatch([key]))[0])

    def predict_many(self, keys) -> np.ndarray:
        return self.scores(keys) >= self.tau

    def predict(self, key: bytes) -> bool:
        return self.score(key) >= self.tau

    def with_tau(self, tau: float) -> Oracle:
        clone = copy.copy(self)
        clone.tau = float(tau)
        return clone

    def to_bytes(self) -> bytes:
        raise TypeError(f"{type(self).__name__} has no serialized form")


def _check_rate(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must be in [0, 1], got {value}")


class SyntheticOracle(Oracle):
    """Oracle with exactly round(f_n * m) false negatives and FPR f_p per fresh key.

    The false negatives are the keys of the build set with the smallest keyed
    hash. A key outside the set scores 1 when its keyed hash is below
    ``f_p * 2**64``. Scores are 0 or 1 and tau is 0.5.
    """

    def __init__(self, positives: dict[bytes, bool], f_p: float, seed: int, size_bits: int = 0):
        self._positives = positives  # key -> is a false negative
        self.f_p = f_p
        self.seed = seed
        self.tau = 0.5
        self.size_bits = size_bits

    @property
    def hash_seed(self) -> int:
        return splitmix64(self.seed ^ 0x5EED0F0AC1E)

    @property
    def fp_threshold(self) -> int:
        return min(1 << 64, int(math.floor(self.f_p * 2.0**64)))

    @property
    def false_negatives(self) -> list[bytes]:
        return [k for k, fn in self._positives.items() if fn]

    def scores(self, keys) -> np.ndarray:
        batch = as_batch(keys)
        h1, _ = batch.hashes(self.hash_seed)
        thr = self.fp_threshold
        if thr >= 1 << 64:
            out = np.ones(len(batch))
        else:
            out = (h1 < np.uint64(thr)).astype(np.float64)
        pos = self._positives
        for i, key in enumerate(batch.keys):
            fn = pos.get(key)
            if fn is not None:
                out[i] = 0.0 if fn else 1.0
        return out

    def to_bytes(self) -> bytes:
        w = Writer(SYNTHETIC_MAGIC, 1)
        w.f64(self.f_p)
        w.u64(self.seed)
        w.f64(self.tau)
        w.u64(self.size_bits)
        w.u64(len(self._positives))
        for key, fn in self._positives.items():
            w.u32(len(key))
            w.raw(key)
            w.u8(int(fn))
        return w.finish()

    @classmethod
    def from_bytes(cls, data: bytes) -> SyntheticOracle:
        r = Reader(data, SYNTHETIC_MAGIC)
        f_p, seed, tau, size_bits, m = r.f64(), r.u64(), r.f64(), r.u64(), r.u64()
        positives = {}
        for _ in range(m):
            key = r.raw(r.u32())
            positives[key] = bool(r.u8())
        r.finish()
        oracle = cls(positives, f_p, seed, size_bits)
        oracle.tau = tau
        return oracle


def make_synthetic_oracle(keys, f_p: float, f_n: float, seed: int = 0) -> SyntheticOracle:
    _check_rate("f_p", f_p)
    _check_rate("f_n", f_n)
    keys = keys if isinstance(keys, KeySet) else KeySet(keys)
    if not len(keys):
        raise ValueError("synthetic oracle needs a nonempty key set")
    m = len(keys)
    n_fn = int(math.floor(f_n * m + 0.5))
    h1, _ = keys.hashes(splitmix64(seed ^ 0xFA15E0E6))
    fn_idx = set(np.argsort(h1, kind="stable")[:n_fn].tolist())
    positives = {k: (i in fn_idx) for i, k in enumerate(keys.keys)}
    return SyntheticOracle(positives, f_p, seed)


def _bigrams(rows: np.ndarray) -> np.ndarray:
    r = rows.astype(np.int64)
    return r[:, :-1] * 256 + r[:, 1:]


class ScoreOracle(Oracle):
    """Logistic of the length-normalized sum of byte-bigram log-odds weights."""

    def __init__(self, bigrams: np.ndarray, weights: np.ndarray, tau: float = math.nan):
        order = np.argsort(bigrams)
        self.bigrams = np.asarray(bigrams, dtype=np.uint16)[order]
        self.weights = np.asarray(weights, dtype=np.float64)[order]
        self._table = np.zeros(1 << 16)
        self._table[self.bigrams] = self.weights
        self.tau = tau
        self.size_bits = 2 * 16 * len(self.bigrams)

    def scores(self, keys) -> np.ndarray:
        batch = as_batch(keys)
        out = np.empty(len(batch))
        for idx, rows in batch.byte_groups():
            length = rows.shape[1]
            total = self._table[_bigrams(rows)].sum(axis=1) if length > 1 else np.zeros(len(idx))
            out[idx] = 1.0 / (1.0 + np.exp(-total / length))
        return out

    def to_bytes(self) -> bytes:
        w = Writer(SCORE_MAGIC, 1)
        w.f64(self.tau)
        w.u32(len(self.bigrams))
        for g, wt in zip(self.bigrams.tolist(), self.weights.tolist()):
            w.u16(g)
            w.f64(wt)
        return w.finish()

    @classmethod
    def from_bytes(cls, data: bytes) -> ScoreOracle:
        r = Reader(data, SCORE_MAGIC)
        tau = r.f64()
        count = r.u32()
        pairs = [(r.u16(), r.f64()) for _ in range(count)]
        r.finish()
        grams = np.array([g for g, _ in pairs], dtype=np.uint16)
        weights = np.array([w for _, w in pairs], dtype=np.float64)
        return cls(grams, weights, tau)


def _bigram_counts(keys: KeyBatch) -> np.ndarray:
    counts = np.zeros(1 << 16, dtype=np.int64)
    for _, rows in keys.byte_groups():
        if rows.shape[1] > 1:
            counts += np.bincount(_bigrams(rows).ravel(), minlength=1 << 16)
    return counts


def train_score_oracle(positives, negatives, smoothing: float = 1.0) -> ScoreOracle:
    if smoothing <= 0:
        raise ValueError("smoothing must be positive")
    positives, negatives = as_batch(positives), as_batch(negatives)
    if not len(positives) or not len(negatives):
        raise ValueError("need nonempty positive and negative sets")
    small, large = sorted((positives, negatives), key=len)
    if any(k in large for k in small.keys):
        raise ValueError("positive and negative training sets overlap")
    cp, cn = _bigram_counts(positives), _bigram_counts(negatives)
    seen = np.flatnonzero(cp + cn)
    weights = np.log((cp[seen] + smoothing) / (cn[seen] + smoothing))
    return ScoreOracle(seen, weights)


def choose_tau(oracle: Oracle, keys, target_f_n: float) -> Oracle:
    """Largest threshold leaving at most round(target_f_n * m) keys scoring below it."""
    _check_rate("target_f_n", target_f_n)
    s = np.sort(oracle.scores(keys))
    m = len(s)
    if not m:
        raise ValueError("choose_tau needs a nonempty key set")
    allowed = int(math.floor(target_f_n * m + 0.5))
    tau = float(np.nextafter(s[-1], np.inf)) if allowed >= m else float(s[allowed])
    return oracle.with_tau(tau)


def measure_profile(oracle: Oracle, keys, held_out_negatives) -> OracleProfile:
    keys, negs = as_batch(keys), as_batch(held_out_negatives)
    if not len(negs):
        raise ValueError("held-out negatives are empty; f_p is undefined")
    if not len(keys):
        raise ValueError("measure_profile needs a nonempty key set")
    fn = int((~oracle.predict_many(keys)).sum())
    fp = float(oracle.predict_many(negs).mean())
    return OracleProfile(f_p=fp, f_n=fn / len(keys), size_bits=oracle.size_bits,
                         false_negatives=fn, m=len(keys))


def load_oracle(data: bytes) -> Oracle:
    head = bytes(data[:4])
    if len(head) < 4:
        raise Truncated("oracle blob shorter than its magic")
    if head == SYNTHETIC_MAGIC:
        return SyntheticOracle.from_bytes(data)
    if head == SCORE_MAGIC:
        return ScoreOracle.from_bytes(data)
    raise BadMagic(f"unknown oracle magic {head!r}")
