import math
import threading

import numpy as np
import pytest

from conftest import ConstantOracle, random_batch, random_keyset
from sandwichbf.errors import BadMagic, ChecksumMismatch, TrailingBytes, Truncated, UnknownVersion
from sandwichbf.filters import Backend, FilterConfig, build_filter
from sandwichbf.oracle import make_synthetic_oracle, train_score_oracle, choose_tau
from sandwichbf.planner import BudgetPlan, ModelParams, optimize_backup_bits
from sandwichbf.sandwich import (
    LearnedBloomFilter,
    SandwichedFilter,
    build_learned,
    build_sandwiched,
    load_structure,
)

BACKENDS = [Backend.STANDARD_BLOOM, Backend.FINGERPRINT_PH]


def plan_for(b, f_n=0.5):
    return optimize_backup_bits(ModelParams(0.5, 0.01, f_n, b))


class TestNoFalseNegatives:
    @pytest.mark.parametrize("backend", BACKENDS)
    @pytest.mark.parametrize("m", [1, 10, 1000])
    @pytest.mark.parametrize("b", [2, 8])
    def test_sandwiched(self, backend, m, b):
        keys = random_keyset(m, seed=m + b)
        oracle = make_synthetic_oracle(keys, 0.01, 0.5, seed=b)
        sw = build_sandwiched(keys, oracle, plan_for(b), backend, seed=4)
        assert sw.query_many(keys).all()
        assert all(k in sw for k in keys.keys[:50])

    @pytest.mark.parametrize("backend", BACKENDS)
    @pytest.mark.parametrize("m", [1, 10, 1000])
    def test_learned(self, backend, m):
        keys = random_keyset(m, seed=m)
        oracle = make_synthetic_oracle(keys, 0.01, 0.5, seed=1)
        lbf = build_learned(keys, oracle, 0.0, backend, total_bits=8 * m)
        assert lbf.query_many(keys).all()

    @pytest.mark.parametrize(
        "plan", [BudgetPlan(4, 0, 0), BudgetPlan(4, 4, 0), BudgetPlan(4, 0, 4), BudgetPlan(4, 1.3, 0.4)]
    )
    def test_extreme_plans(self, plan):
        keys = random_keyset(300, seed=5)
        oracle = make_synthetic_oracle(keys, 0.2, 0.9, seed=3)
        assert build_sandwiched(keys, oracle, plan).query_many(keys).all()

    def test_score_oracle(self):
        pos = random_keyset(500, key_len=6, seed=1, tag=0x01)
        neg = random_keyset(500, key_len=6, seed=2, tag=0x02)
        oracle = choose_tau(train_score_oracle(pos, neg), pos, 0.3)
        sw = build_sandwiched(pos, oracle, plan_for(6), Backend.STANDARD_BLOOM)
        assert sw.query_many(pos).all()

    def test_mixed_backends(self):
        keys = random_keyset(1000, seed=9)
        oracle = make_synthetic_oracle(keys, 0.01, 0.5, seed=1)
        sw = build_sandwiched(keys, oracle, plan_for(8), Backend.STANDARD_BLOOM,
                              backup_backend=Backend.FINGERPRINT_PH)
        assert sw.initial.backend is Backend.STANDARD_BLOOM
        assert sw.backup.backend is Backend.FINGERPRINT_PH
        assert sw.query_many(keys).all()


class TestConstruction:
    def test_backup_holds_exactly_false_negatives(self):
        keys = random_keyset(1000, seed=2)
        oracle = make_synthetic_oracle(keys, 0.01, 0.3, seed=1)
        sw = build_sandwiched(keys, oracle, plan_for(8))
        assert sw.false_negatives == 300 == sw.backup.n_keys
        assert sw.initial.n_keys == 1000
        assert sw.backup.total_bits == round(sw.plan.b2 * 1000)
        assert sw.plan.m == 1000

    def test_layer_sizes(self):
        keys = random_keyset(1000, seed=2)
        oracle = make_synthetic_oracle(keys, 0.01, 0.5, seed=1)
        sw = build_sandwiched(keys, oracle, BudgetPlan(8, 4.6853, 3.3147), Backend.FINGERPRINT_PH)
        assert sw.initial.total_bits == 4685
        assert sw.backup.total_bits == 3315
        assert sw.backup.bits_per_key == pytest.approx(3315 / 500)

    def test_learned_sizing(self):
        keys = random_keyset(1000, seed=2)
        oracle = make_synthetic_oracle(keys, 0.01, 0.5, seed=1)
        assert build_learned(keys, oracle, 6.0).backup.total_bits == 3000
        lbf = build_learned(keys, oracle, 0.0, total_bits=8000)
        assert lbf.backup.total_bits == 8000 and lbf.b == 8.0 and lbf.m == 1000

    def test_learned_without_false_negatives(self):
        keys = random_keyset(200, seed=3, tag=0x01)
        oracle = make_synthetic_oracle(keys, 0.1, 0.0, seed=1)
        lbf = build_learned(keys, oracle, 0.0, total_bits=1600)
        assert lbf.backup.n_keys == 0
        probe = random_batch(20_000, tag=0x03)
        np.testing.assert_array_equal(lbf.query_many(probe), oracle.predict_many(probe))

    def test_wasted_bits_warning(self):
        keys = random_keyset(200, seed=3)
        oracle = make_synthetic_oracle(keys, 0.1, 0.0, seed=1)
        with pytest.warns(UserWarning, match="wasted"):
            build_sandwiched(keys, oracle, BudgetPlan(8, 4, 4))

    def test_zero_b2_backup_always_yes(self):
        keys = random_keyset(200, seed=3, tag=0x01)
        oracle = make_synthetic_oracle(keys, 0.0, 0.5, seed=1)
        sw = build_sandwiched(keys, oracle, BudgetPlan(8, 8, 0))
        probe = random_batch(5000, tag=0x03)
        np.testing.assert_array_equal(sw.query_many(probe), sw.initial.contains_many(probe))

    @pytest.mark.parametrize("plan", [BudgetPlan(4, 2, 2), BudgetPlan(4, 4, 0)])
    def test_rejects_bad_plans(self, plan):
        keys = random_keyset(10)
        oracle = make_synthetic_oracle(keys, 0.1, 0.5)
        object.__setattr__(plan, "b1", -1.0)
        with pytest.raises(ValueError):
            build_sandwiched(keys, oracle, plan)
        object.__setattr__(plan, "b1", 5.0)
        with pytest.raises(ValueError):
            build_sandwiched(keys, oracle, plan)

    def test_rejects_unset_tau(self):
        keys = random_keyset(10)
        oracle = ConstantOracle(1.0, tau=math.nan)
        with pytest.raises(ValueError):
            build_sandwiched(keys, oracle, BudgetPlan(4, 2, 2))
        with pytest.raises(ValueError):
            build_learned(keys, oracle, 4)

    def test_rejects_negative_backup_bits(self):
        keys = random_keyset(10)
        with pytest.raises(ValueError):
            build_learned(keys, make_synthetic_oracle(keys, 0.1, 0.5), -1)

    def test_seeded_determinism(self):
        keys = random_keyset(2000, seed=3)
        oracle = make_synthetic_oracle(keys, 0.01, 0.5, seed=1)
        a = build_sandwiched(keys, oracle, plan_for(8), seed=7).to_bytes()
        assert a == build_sandwiched(keys, oracle, plan_for(8), seed=7).to_bytes()
        assert a != build_sandwiched(keys, oracle, plan_for(8), seed=8).to_bytes()

    def test_layer_seeds_differ(self):
        keys = random_keyset(500, seed=3)
        oracle = make_synthetic_oracle(keys, 0.01, 0.5, seed=1)
        sw = build_sandwiched(keys, oracle, plan_for(8), Backend.STANDARD_BLOOM)
        assert sw.initial.hash_seed != sw.backup.hash_seed


class TestQuery:
    def setup_method(self):
        self.keys = random_keyset(1000, seed=21, tag=0x01)
        self.oracle = make_synthetic_oracle(self.keys, 0.05, 0.5, seed=2)

    def test_b1_zero_matches_learned(self):
        for backend in BACKENDS:
            sw = build_sandwiched(self.keys, self.oracle, BudgetPlan(8, 0, 8), backend, seed=5)
            lbf = build_learned(self.keys, self.oracle, 0.0, backend, seed=5, total_bits=8000)
            probe = random_batch(10_000, tag=0x03)
            np.testing.assert_array_equal(sw.query_many(probe), lbf.query_many(probe))

    def test_query_paths(self):
        sw = build_sandwiched(self.keys, self.oracle, plan_for(8), seed=1)
        probe = random_batch(50_000, tag=0x03)
        init = sw.initial.contains_many(probe)
        orc = self.oracle.predict_many(probe)
        back = sw.backup.contains_many(probe)
        expected = init & (orc | back)
        np.testing.assert_array_equal(sw.query_many(probe), expected)
        assert [sw.query(k) for k in probe.keys[:500]] == expected[:500].tolist()
        # each path is actually exercised
        assert (~init).any() and (init & orc).any() and (init & ~orc & back).any() and (init & ~orc & ~back).any()

    def test_initial_rejection_short_circuits(self):
        # the oracle accepts everything but cannot override the initial "no"
        oracle = ConstantOracle(1.0)
        sw = build_sandwiched(self.keys, oracle, BudgetPlan(8, 8, 0))
        probe = random_batch(20_000, tag=0x03)
        np.testing.assert_array_equal(sw.query_many(probe), sw.initial.contains_many(probe))

    def test_learned_query_rule(self):
        lbf = build_learned(self.keys, self.oracle, 0.0, total_bits=8000)
        probe = random_batch(20_000, tag=0x03)
        expected = self.oracle.predict_many(probe) | lbf.backup.contains_many(probe)
        np.testing.assert_array_equal(lbf.query_many(probe), expected)

    def test_path_accounting(self):
        sw = build_sandwiched(self.keys, self.oracle, plan_for(8), seed=1)
        probe = random_batch(50_000, tag=0x03)
        answers, c = sw.trace(probe)
        assert c.probes == 50_000
        assert c.passed_initial == c.oracle_positive + c.oracle_negative
        assert c.passed_initial == int(sw.initial.contains_many(probe).sum())
        assert c.accepted == int(answers.sum())
        assert c.backup_positive <= c.oracle_negative

    def test_empty_probe(self):
        sw = build_sandwiched(self.keys, self.oracle, plan_for(8))
        answers, c = sw.trace([])
        assert answers.size == 0 and c.probes == 0

    def test_more_initial_bits_lower_fpr(self):
        probe = random_batch(200_000, tag=0x03)
        rates = []
        for b1 in (0, 2, 4, 6):
            sw = build_sandwiched(self.keys, self.oracle, BudgetPlan(b1 + 3, b1, 3), seed=3)
            rates.append(sw.query_many(probe).mean())
        assert all(x > y for x, y in zip(rates, rates[1:]))

    def test_concurrent_queries(self):
        sw = build_sandwiched(self.keys, self.oracle, plan_for(8))
        probe = random_batch(20_000, tag=0x03)
        expected = sw.query_many(probe)
        out = [None] * 4

        def run(i):
            out[i] = sw.query_many(probe)

        threads = [threading.Thread(target=run, args=(i,)) for i in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        for o in out:
            np.testing.assert_array_equal(o, expected)


class TestSerialization:
    def structures(self):
        keys = random_keyset(2000, seed=31, tag=0x01)
        oracle = make_synthetic_oracle(keys, 0.02, 0.5, seed=2)
        score = choose_tau(train_score_oracle(keys, random_keyset(2000, seed=32, tag=0x02)), keys, 0.3)
        return keys, [
            build_filter(keys, FilterConfig(Backend.STANDARD_BLOOM, 8, 1)),
            build_filter(keys, FilterConfig(Backend.FINGERPRINT_PH, 8, 1)),
            build_learned(keys, oracle, 0.0, total_bits=16_000),
            build_sandwiched(keys, oracle, plan_for(8), Backend.STANDARD_BLOOM),
            build_sandwiched(keys, score, plan_for(8), Backend.FINGERPRINT_PH),
        ]

    def test_round_trip(self):
        keys, items = self.structures()
        probe = random_batch(10_000, tag=0x03)
        for s in items:
            back = load_structure(s.to_bytes())
            assert type(back) is type(s)
            query = getattr(s, "query_many", None) or s.contains_many
            query_back = getattr(back, "query_many", None) or back.contains_many
            np.testing.assert_array_equal(query_back(probe), query(probe))
            assert query_back(keys).all()
            assert back.to_bytes() == s.to_bytes()

    def test_plan_preserved(self):
        _, items = self.structures()
        back = load_structure(items[3].to_bytes())
        assert isinstance(back, SandwichedFilter)
        p, q = back.plan, items[3].plan
        assert (p.b, p.b1, p.b2, p.m) == (q.b, q.b1, q.b2, q.m)
        lbf = load_structure(items[2].to_bytes())
        assert isinstance(lbf, LearnedBloomFilter) and (lbf.m, lbf.b) == (2000, 8.0)

    def test_layout(self):
        _, items = self.structures()
        blob = items[3].to_bytes()
        assert blob[:4] == b"SNDW" and blob[4] == 1
        b, b1, b2 = np.frombuffer(blob[5:29], "<f8")
        assert (b, b1, b2) == (8.0, items[3].plan.b1, items[3].plan.b2)
        assert int.from_bytes(blob[29:37], "little") == 2000
        n = int.from_bytes(blob[37:45], "little")
        assert blob[45:49] == b"SYNO" and n == len(items[3].oracle.to_bytes())

    @pytest.mark.parametrize(
        "mutate, exc",
        [
            (lambda b: b"ABCD" + b[4:], BadMagic),
            (lambda b: b[:4] + b"\x09" + b[5:], UnknownVersion),
            (lambda b: b[:3], Truncated),
            (lambda b: b[:40], Truncated),
            (lambda b: b[:100] + bytes([b[100] ^ 0x10]) + b[101:], ChecksumMismatch),
            (lambda b: b + b"xyz", TrailingBytes),
        ],
    )
    def test_corruption(self, mutate, exc):
        _, items = self.structures()
        with pytest.raises(exc):
            load_structure(mutate(items[3].to_bytes()))
