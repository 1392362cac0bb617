import math

import numpy as np
import pytest

from sandwichbf.filters import KeyBatch, KeySet
from sandwichbf.oracle import Oracle

ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


def binomial_sigma(p: float, n: int) -> float:
    return math.sqrt(p * (1 - p) / n)


def random_keyset(n: int, key_len: int = 16, seed: int = 0, tag: int | None = None) -> KeySet:
    rows = np.random.default_rng(seed).integers(0, 256, size=(n, key_len), dtype=np.uint8)
    if tag is not None:
        rows[:, 0] = tag
    ks = KeySet.from_matrix(rows)
    assert len(set(ks.keys)) == n
    return ks


def random_batch(n: int, key_len: int = 16, seed: int = 1, tag: int | None = None) -> KeyBatch:
    rows = np.random.default_rng(seed).integers(0, 256, size=(n, key_len), dtype=np.uint8)
    if tag is not None:
        rows[:, 0] = tag
    return KeyBatch.from_matrix(rows)


class ConstantOracle(Oracle):
    def __init__(self, value: float, tau: float = 0.5):
        self.value = value
        self.tau = tau

    def scores(self, keys):
        return np.full(len(keys), self.value)


class TableOracle(Oracle):
    """Scores looked up from a dict; unknown keys score ``default``."""

    def __init__(self, table: dict, tau: float = 0.5, default: float = 0.0):
        self.table = table
        self.tau = tau
        self.default = default

    def scores(self, keys):
        return np.array([self.table.get(k, self.default) for k in keys], dtype=float)


@pytest.fixture(scope="session")
def positives_100k():
    return random_keyset(100_000, seed=11, tag=0x01)


@pytest.fixture(scope="session")
def negatives_1m():
    # tag byte keeps them disjoint from positives_100k
    return random_batch(1_000_000, seed=12, tag=0x03)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE_RESULTS, key=lambda s: int(s.split()[0])):
        ok, detail = ACCEPTANCE_RESULTS[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
