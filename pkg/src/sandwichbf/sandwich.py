"""Learned and sandwiched learned Bloom filters.

Learned:     oracle -> backup filter over the oracle's false negatives.
Sandwiched:  initial filter over all keys -> oracle -> backup filter.

The initial filter's "no" is final. Anything that passes it is accepted if
the oracle says yes, otherwise the backup filter decides. Because the
backup holds exactly the keys the oracle rejects, no member is ever
rejected.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from sandwichbf._binfmt import Reader, Writer
from sandwichbf._hashing import splitmix64
from sandwichbf.errors import BadMagic, Truncated
from sandwichbf.filters import Backend, Filter, FilterConfig, KeySet, build_filter, deserialize
from sandwichbf.filters.base import round_half_up
from sandwichbf.filters.keys import KeyBatch, as_batch
from sandwichbf.oracle import Oracle, load_oracle
from sandwichbf.planner import BudgetPlan

MAGIC = b"SNDW"
VERSION = 1

# fixed offsets from the master seed keep the layers' hashes independent
INITIAL_SEED_OFFSET = 0x1A1
BACKUP_SEED_OFFSET = 0xBAC


def layer_seed(master: int, offset: int) -> int:
    return splitmix64((master + offset) & ((1 << 64) - 1))


@dataclass(frozen=True)
class PathCounts:
    """How a probe stream moved through the layers."""

    probes: int
    passed_initial: int
    oracle_positive: int
    oracle_negative: int
    backup_positive: int

    @property
    def accepted(self) -> int:
        return self.oracle_positive + self.backup_positive


def _false_negative_set(keys: KeySet, oracle: Oracle) -> KeySet:
    return keys.take(np.flatnonzero(~oracle.predict_many(keys)))


def _backup(fn_keys: KeySet, backend: Backend, seed: int, total_bits: int) -> Filter:
    return build_filter(fn_keys, FilterConfig(backend, 0.0, seed), total_bits=total_bits)


class _Layered:
    initial: Filter | None
    oracle: Oracle
    backup: Filter

    def query(self, key: bytes) -> bool:
        if self.initial is not None and not self.initial.contains(key):
            return False
        if self.oracle.predict(key):
            return True
        return self.backup.contains(key)

    def query_many(self, keys) -> np.ndarray:
        return self.trace(keys)[0]

    def trace(self, keys) -> tuple[np.ndarray, PathCounts]:
        """Answers for every key plus per-layer path counters."""
        batch = as_batch(keys)
        n = len(batch)
        if self.initial is None:
            passed = np.ones(n, dtype=bool)
        else:
            passed = self.initial.contains_many(batch)
        sub = batch if passed.all() else batch.take(np.flatnonzero(passed))
        oracle_yes = self.oracle.predict_many(sub) if len(sub) else np.zeros(0, bool)
        backup_yes = np.zeros(len(sub), dtype=bool)
        rest = np.flatnonzero(~oracle_yes)
        if rest.size:
            backup_yes[rest] = self.backup.contains_many(sub.take(rest) if rest.size != len(sub) else sub)
        answer = np.zeros(n, dtype=bool)
        answer[passed] = oracle_yes | backup_yes
        counts = PathCounts(
            probes=n,
            passed_initial=int(passed.sum()),
            oracle_positive=int(oracle_yes.sum()),
            oracle_negative=int((~oracle_yes).sum()),
            backup_positive=int(backup_yes.sum()),
        )
        return answer, counts

    def __contains__(self, key: bytes) -> bool:
        return self.query(key)


@dataclass(frozen=True, eq=False)
class LearnedBloomFilter(_Layered):
    oracle: Oracle
    backup: Filter
    m: int = 0
    b: float = 0.0

    @property
    def initial(self) -> None:
        return None

    @property
    def false_negatives(self) -> int:
        return self.backup.n_keys

    def to_bytes(self) -> bytes:
        plan = BudgetPlan(self.b, 0.0, self.b, self.m)
        return _write(plan, self.oracle, None, self.backup)


@dataclass(frozen=True, eq=False)
class SandwichedFilter(_Layered):
    initial: Filter
    oracle: Oracle
    backup: Filter
    plan: BudgetPlan

    @property
    def false_negatives(self) -> int:
        return self.backup.n_keys

    def to_bytes(self) -> bytes:
        return _write(self.plan, self.oracle, self.initial, self.backup)


def build_learned(
    keys,
    oracle: Oracle,
    backup_bits_per_key: float,
    backend=Backend.FINGERPRINT_PH,
    *,
    seed: int = 0,
    total_bits: int | None = None,
) -> LearnedBloomFilter:
    """Learned Bloom filter whose backup holds the oracle's false negatives.

    The backup gets ``backup_bits_per_key`` bits per stored false negative,
    or exactly ``total_bits`` when given (budget comparisons pass b * m).
    """
    keys = keys if isinstance(keys, KeySet) else KeySet(keys)
    if backup_bits_per_key < 0:
        raise ValueError("backup_bits_per_key must be >= 0")
    if math.isnan(oracle.tau):
        raise ValueError("oracle threshold is unset; call choose_tau first")
    backend = Backend.parse(backend)
    fn_keys = _false_negative_set(keys, oracle)
    if total_bits is None:
        total_bits = round_half_up(backup_bits_per_key * len(fn_keys))
    backup = _backup(fn_keys, backend, layer_seed(seed, BACKUP_SEED_OFFSET), total_bits)
    b = total_bits / len(keys) if len(keys) else 0.0
    return LearnedBloomFilter(oracle, backup, len(keys), b)


def build_sandwiched(
    keys,
    oracle: Oracle,
    plan: BudgetPlan,
    backend=Backend.FINGERPRINT_PH,
    *,
    seed: int = 0,
    backup_backend=None,
) -> SandwichedFilter:
    """Initial filter at ``plan.b1`` bits/key over all keys, backup at
    ``round(plan.b2 * m)`` total bits over the oracle's false negatives."""
    keys = keys if isinstance(keys, KeySet) else KeySet(keys)
    if plan.b1 < 0 or plan.b2 < 0:
        raise ValueError("plan allocations must be >= 0")
    if plan.b1 + plan.b2 > plan.b + 1e-9:
        raise ValueError("plan exceeds its budget")
    if math.isnan(oracle.tau):
        raise ValueError("oracle threshold is unset; call choose_tau first")
    backend = Backend.parse(backend)
    backup_backend = backend if backup_backend is None else Backend.parse(backup_backend)
    m = len(keys)
    if plan.m != m:
        plan = replace(plan, m=m)
    initial = build_filter(
        keys, FilterConfig(backend, plan.b1, layer_seed(seed, INITIAL_SEED_OFFSET))
    )
    fn_keys = _false_negative_set(keys, oracle)
    total = round_half_up(plan.b2 * m)
    if not len(fn_keys) and total > 0:
        warnings.warn("oracle has no false negatives; backup bits are wasted", stacklevel=2)
    backup = _backup(fn_keys, backup_backend, layer_seed(seed, BACKUP_SEED_OFFSET), total)
    return SandwichedFilter(initial, oracle, backup, plan)


def _write(plan: BudgetPlan, oracle: Oracle, initial: Filter | None, backup: Filter) -> bytes:
    w = Writer(MAGIC, VERSION)
    w.f64(plan.b)
    w.f64(plan.b1)
    w.f64(plan.b2)
    w.u64(plan.m)
    w.blob(oracle.to_bytes())
    w.blob(initial.to_bytes() if initial is not None else b"")
    w.blob(backup.to_bytes())
    return w.finish()


def load_structure(data: bytes):
    """Decode a plain filter ("SBFL") or a learned/sandwiched structure ("SNDW")."""
    head = bytes(data[:4])
    if len(head) < 4:
        raise Truncated("blob shorter than its magic")
    if head == b"SBFL":
        return deserialize(data)
    if head != MAGIC:
        raise BadMagic(f"unknown structure magic {head!r}")
    r = Reader(data, MAGIC, (VERSION,))
    b, b1, b2, m = r.f64(), r.f64(), r.f64(), r.u64()
    oracle_blob, initial_blob, backup_blob = r.blob(), r.blob(), r.blob()
    r.finish()
    oracle = load_oracle(oracle_blob)
    backup = deserialize(backup_blob)
    if not initial_blob:
        return LearnedBloomFilter(oracle, backup, m, b)
    initial = deserialize(initial_blob)
    return SandwichedFilter(initial, oracle, backup, BudgetPlan(b, b1, b2, m, initial.backend.alpha))


__all__ = [
    "KeyBatch",
    "LearnedBloomFilter",
    "PathCounts",
    "SandwichedFilter",
    "build_learned",
    "build_sandwiched",
    "layer_seed",
    "load_structure",
]
