"""Byte-string key containers.

``KeyBatch`` is any ordered sequence of keys (duplicates allowed), used for
probe streams. ``KeySet`` is a duplicate-free batch, used as a build set.
Both cache a length-grouped numpy view so every filter layer can hash the
same batch cheaply under its own seed.
"""

from __future__ import annotations

import warnings
from collections.abc import Iterable, Sequence
from functools import cached_property

import numpy as np

from sandwichbf._hashing import hash_words, pack_rows

MAX_KEY_LEN = 4096


def _check_key(key: bytes) -> bytes:
    if not isinstance(key, (bytes, bytearray, memoryview)):
        raise TypeError(f"keys must be bytes, got {type(key).__name__}")
    key = bytes(key)
    if not 1 <= len(key) <= MAX_KEY_LEN:
        raise ValueError(f"key length must be in [1, {MAX_KEY_LEN}], got {len(key)}")
    return key


class KeyBatch(Sequence):
    """An ordered batch of byte-string keys."""

    def __init__(self, keys: Iterable[bytes], *, _checked: bool = False) -> None:
        if _checked:
            self._keys = list(keys)
        else:
            self._keys = [_check_key(k) for k in keys]

    @classmethod
    def from_matrix(cls, rows: np.ndarray) -> "KeyBatch":
        """Build from an (n, L) uint8 matrix of fixed-length keys."""
        rows = np.ascontiguousarray(rows, dtype=np.uint8)
        if not 1 <= rows.shape[1] <= MAX_KEY_LEN:
            raise ValueError(f"key length must be in [1, {MAX_KEY_LEN}], got {rows.shape[1]}")
        batch = cls(list(map(bytes, rows)), _checked=True)
        if len(batch) == len(rows):
            batch.__dict__["_groups"] = [(np.arange(len(rows)), rows.shape[1], rows, pack_rows(rows))]
        return batch

    def __len__(self) -> int:
        return len(self._keys)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return type(self)(self._keys[i], _checked=True)
        return self._keys[i]

    def __iter__(self):
        return iter(self._keys)

    def __contains__(self, key) -> bool:
        return key in self._set

    def __eq__(self, other) -> bool:
        if isinstance(other, KeyBatch):
            return self._keys == other._keys
        return NotImplemented

    def __hash__(self):
        return id(self)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(n={len(self)})"

    @property
    def keys(self) -> list[bytes]:
        return self._keys

    @cached_property
    def _set(self) -> set[bytes]:
        return set(self._keys)

    def take(self, indices) -> KeyBatch:
        return KeyBatch([self._keys[i] for i in np.asarray(indices).tolist()], _checked=True)

    @cached_property
    def _groups(self) -> list[tuple[np.ndarray, int, np.ndarray, np.ndarray]]:
        # (row indices, key length, uint8 rows, uint64 words) per distinct length
        if not self._keys:
            return []
        lengths = np.fromiter(map(len, self._keys), dtype=np.int64, count=len(self._keys))
        groups = []
        for length in np.unique(lengths).tolist():
            idx = np.flatnonzero(lengths == length)
            if idx.size == len(self._keys):
                buf = b"".join(self._keys)
            else:
                buf = b"".join([self._keys[i] for i in idx.tolist()])
            rows = np.frombuffer(buf, dtype=np.uint8).reshape(idx.size, length)
            groups.append((idx, length, rows, pack_rows(rows)))
        return groups

    def hashes(self, seed: int) -> tuple[np.ndarray, np.ndarray]:
        """Keyed 128-bit hash of every key, as two uint64 arrays."""
        n = len(self._keys)
        h1 = np.empty(n, dtype=np.uint64)
        h2 = np.empty(n, dtype=np.uint64)
        for idx, length, _, words in self._groups:
            a, b = hash_words(words, length, seed)
            h1[idx] = a
            h2[idx] = b
        return h1, h2

    def byte_groups(self):
        """Yield (row indices, uint8 matrix) per distinct key length."""
        for idx, _, rows, _ in self._groups:
            yield idx, rows


class KeySet(KeyBatch):
    """A duplicate-free batch of keys (the positive set of a filter)."""

    def __init__(self, keys: Iterable[bytes], *, _checked: bool = False) -> None:
        super().__init__(keys, _checked=_checked)
        if not _checked:
            unique = list(dict.fromkeys(self._keys))
            if len(unique) != len(self._keys):
                warnings.warn(
                    f"dropped {len(self._keys) - len(unique)} duplicate keys",
                    stacklevel=2,
                )
                self._keys = unique

    @classmethod
    def from_matrix(cls, rows: np.ndarray) -> "KeySet":
        ks = super().from_matrix(rows)
        if len(ks._set) != len(ks):
            return cls(ks.keys)
        return ks

    @property
    def m(self) -> int:
        return len(self._keys)

    def take(self, indices) -> KeySet:
        return KeySet([self._keys[i] for i in np.asarray(indices).tolist()], _checked=True)


def as_batch(keys) -> KeyBatch:
    if isinstance(keys, KeyBatch):
        return keys
    return KeyBatch(keys)
