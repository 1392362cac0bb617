"""Minimal perfect hashing by hash-and-displace.

Keys are spread over ``B`` buckets (about four keys each). Every bucket gets
a 16-bit displacement ``d``, split as ``d = q * R + r`` with
``R = min(n, 256)``, and its keys land on ``(f1 + q * f2 + r) mod n``. The
quotient changes the relative spacing of a bucket's keys, the remainder
shifts them together.

Buckets are placed largest first, each taking the first ``d`` whose slots
are all free. The last singleton buckets are instead placed with a
bipartite matching against the remaining free slots: greedy placement of
the very last keys needs ~n tries, which a 16-bit seed cannot cover once
n is much larger than 65536.

A failed construction is retried with one more bucket. The bucket count is
mixed into every derived hash, so it doubles as the retry seed and the
serialized form needs nothing beyond (B, seeds).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from sandwichbf._hashing import fmix64, splitmix64
from sandwichbf.errors import MPHFConstructionError

SEED_RANGE = 1 << 16
MAX_RETRIES = 16
KEYS_PER_BUCKET = 4
SHIFT_SPAN = 256
_CHUNKS = ((0, 64), (64, 1024), (1024, 8192), (8192, SEED_RANGE))
_D = np.arange(SEED_RANGE, dtype=np.int64)


def base_bucket_count(n: int) -> int:
    return max(1, math.ceil(n / KEYS_PER_BUCKET))


def derive(h: np.ndarray, n: int, buckets: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Map key hashes to (bucket, f1, f2) for a table of ``n`` slots."""
    salt = np.uint64(splitmix64(buckets * 0x51ED2701 + n))
    with np.errstate(over="ignore"):
        x = fmix64(h ^ salt)
        y = fmix64(x + np.uint64(0x9E3779B97F4A7C15))
        z = fmix64(y + np.uint64(0xD6E8FEB86659FD93))
    bucket = (x % np.uint64(buckets)).astype(np.int64)
    f1 = (y % np.uint64(n)).astype(np.int64)
    f2 = (z % np.uint64(n)).astype(np.int64)
    return bucket, f1, f2


def split_displacement(d: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    span = min(n, SHIFT_SPAN)
    return d // span, d % span


@dataclass(frozen=True, eq=False)
class MinimalPerfectHash:
    n: int
    seeds: np.ndarray  # uint16, one per bucket

    @property
    def bucket_count(self) -> int:
        return len(self.seeds)

    def lookup(self, h: np.ndarray) -> np.ndarray:
        """Slot in [0, n) for each key hash."""
        bucket, f1, f2 = derive(h, self.n, self.bucket_count)
        q, r = split_displacement(self.seeds[bucket].astype(np.int64), self.n)
        return (f1 + q * f2 + r) % self.n


def _place_greedy(a, s, n, free, q, r) -> int | None:
    for lo, hi in _CHUNKS:
        cand = _D[lo:hi]
        for ai, si in zip(a.tolist(), s.tolist()):
            cand = cand[free[(ai + q[cand] * si + r[cand]) % n]]
            if not cand.size:
                break
        if not cand.size:
            continue
        pos = (a[None, :] + q[cand, None] * s[None, :] + r[cand, None]) % n
        if len(a) > 1:
            srt = np.sort(pos, axis=1)
            ok = np.flatnonzero((srt[:, 1:] != srt[:, :-1]).all(axis=1))
            if not ok.size:
                continue
            first = ok[0]
        else:
            first = 0
        free[pos[first]] = False
        return int(cand[first])
    return None


def _tail_edges(a, s, n, slots):
    """All (key, slot, d) with slot reachable from key by displacement d."""
    span = min(n, SHIFT_SPAN)
    # a window of n slots already reaches everything
    quotients = 1 if span == n else -(-SEED_RANGE // span)
    q = np.arange(quotients, dtype=np.int64)
    rows, cols, ds = [], [], []
    for j, (aj, sj) in enumerate(zip(a.tolist(), s.tolist())):
        start = (aj + q * sj) % n
        for shift in (0, n):  # second pass catches windows wrapping past n
            lo = np.searchsorted(slots, start - shift)
            hi = np.searchsorted(slots, start - shift + span)
            cnt = hi - lo
            if not cnt.sum():
                continue
            owner = np.repeat(np.arange(quotients), cnt)
            col = np.concatenate([np.arange(x, y) for x, y in zip(lo[cnt > 0], hi[cnt > 0])])
            d = owner * span + (slots[col] - start[owner] + shift)
            keep = d < SEED_RANGE
            rows.append(np.full(keep.sum(), j))
            cols.append(col[keep])
            ds.append(d[keep])
    if not rows:
        return np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0, np.int64)
    rows, cols, ds = map(np.concatenate, (rows, cols, ds))
    # smallest displacement per (key, slot)
    order = np.lexsort((ds, cols, rows))
    rows, cols, ds = rows[order], cols[order], ds[order]
    first = np.ones(rows.size, dtype=bool)
    first[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
    return rows[first], cols[first], ds[first]


def _place_matching(a, s, n, free) -> np.ndarray | None:
    slots = np.flatnonzero(free)
    k = len(a)
    if len(slots) != k:
        return None
    rows, cols, ds = _tail_edges(a, s, n, slots)
    graph = csr_matrix((np.ones(rows.size, dtype=np.int8), (rows, cols)), shape=(k, k))
    match = maximum_bipartite_matching(graph, perm_type="column")
    if (match < 0).any():
        return None
    lookup = dict(zip(zip(rows.tolist(), cols.tolist()), ds.tolist()))
    return np.array([lookup[(j, int(c))] for j, c in enumerate(match)], dtype=np.uint16)


def _assign(bucket, f1, f2, n, buckets) -> np.ndarray | None:
    seeds = np.zeros(buckets, dtype=np.uint16)
    order = np.argsort(bucket, kind="stable")
    counts = np.bincount(bucket, minlength=buckets)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    # largest bucket first, lower index on ties
    plan = np.lexsort((np.arange(buckets), -counts))
    plan = plan[counts[plan] > 0]
    singles = int((counts[plan] == 1).sum())
    tail = min(singles, max(256, math.ceil(20 * n / SEED_RANGE)))
    greedy, matched = plan[: len(plan) - tail], plan[len(plan) - tail :]

    free = np.ones(n, dtype=bool)
    q, r = split_displacement(_D, n)
    for b in greedy.tolist():
        members = order[starts[b] : starts[b] + counts[b]]
        d = _place_greedy(f1[members], f2[members], n, free, q, r)
        if d is None:
            return None
        seeds[b] = d
    if tail:
        keys = order[starts[matched]]
        ds = _place_matching(f1[keys], f2[keys], n, free)
        if ds is None:
            return None
        seeds[matched] = ds
    return seeds


def build_mphf(h: np.ndarray) -> MinimalPerfectHash:
    """Build a minimal perfect hash over distinct 64-bit key hashes ``h``."""
    n = len(h)
    if n == 0:
        raise ValueError("cannot build a perfect hash over zero keys")
    if np.unique(h).size != n:
        raise MPHFConstructionError("64-bit key hashes collide; keys cannot be separated")
    base = base_bucket_count(n)
    for retry in range(MAX_RETRIES):
        buckets = base + retry
        bucket, f1, f2 = derive(h, n, buckets)
        seeds = _assign(bucket, f1, f2, n, buckets)
        if seeds is not None:
            return MinimalPerfectHash(n, seeds)
    raise MPHFConstructionError(f"no perfect hash found for {n} keys after {MAX_RETRIES} attempts")
