"""Experiment engine: workloads, FPR measurement and budget sweeps."""

from __future__ import annotations

import csv
import enum
import io
import json
import logging
import math
import time
import warnings
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from statistics import NormalDist

import numpy as np

from sandwichbf.errors import ContractViolation, MPHFConstructionError
from sandwichbf.filters import Backend, Filter, FilterConfig, KeySet, build_filter
from sandwichbf.filters.base import round_half_up
from sandwichbf.filters.keys import KeyBatch
from sandwichbf.oracle import Oracle, OracleProfile, make_synthetic_oracle
from sandwichbf.planner import (
    BudgetPlan,
    ModelParams,
    PlannerWarning,
    model_false_positive_rate,
    optimize_backup_bits,
)
from sandwichbf.sandwich import (
    LearnedBloomFilter,
    SandwichedFilter,
    build_learned,
    build_sandwiched,
    layer_seed,
)

log = logging.getLogger(__name__)

POSITIVE_TAG, TRAIN_TAG, TEST_TAG = 0x01, 0x02, 0x03
CSV_HEADER = (
    "b", "structure", "b1", "b2", "model_fpr", "empirical_fpr",
    "ci_low", "ci_high", "probes", "ns_per_query",
)
PLAIN_SEED_OFFSET = 0x9A1


class Structure(str, enum.Enum):
    PLAIN_BLOOM = "plain_bloom"
    LEARNED = "learned"
    SANDWICHED = "sandwiched"

    @property
    def rank(self) -> int:
        return list(Structure).index(self)


@dataclass(frozen=True, eq=False)
class Workload:
    positives: KeySet
    train_negatives: KeySet
    test_negatives: KeySet
    seed: int


def _random_keys(rng: np.random.Generator, count: int, key_len: int, tag: int) -> KeySet:
    if count > 256 ** (key_len - 1):
        raise ValueError(f"cannot draw {count} distinct {key_len}-byte keys")
    keys: dict[bytes, None] = {}
    while len(keys) < count:
        need = count - len(keys)
        rows = np.empty((need, key_len), dtype=np.uint8)
        rows[:, 0] = tag
        rows[:, 1:] = rng.integers(0, 256, size=(need, key_len - 1), dtype=np.uint8)
        before = len(keys)
        keys.update(dict.fromkeys(map(bytes, rows)))
        if len(keys) == before + need and before == 0:
            return KeySet.from_matrix(rows)
    return KeySet(list(keys), _checked=True)


def generate_workload(
    m: int, n_train_neg: int, n_test_neg: int, key_len: int = 16, seed: int = 0
) -> Workload:
    """Seeded workload; a role byte (0x01/0x02/0x03) leads every key, so the
    positive, training-negative and test-negative sets are disjoint."""
    if key_len < 2:
        raise ValueError("key_len must be >= 2 (one byte is the role tag)")
    if key_len > 4096:
        raise ValueError("key_len must be <= 4096")
    if min(m, n_train_neg, n_test_neg) < 0:
        raise ValueError("set sizes must be >= 0")
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)]
    return Workload(
        positives=_random_keys(rngs[0], m, key_len, POSITIVE_TAG),
        train_negatives=_random_keys(rngs[1], n_train_neg, key_len, TRAIN_TAG),
        test_negatives=_random_keys(rngs[2], n_test_neg, key_len, TEST_TAG),
        seed=seed,
    )


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class MeasurementReport:
    structure: Structure
    plan: BudgetPlan
    oracle_profile: OracleProfile | None
    probes: int
    false_positives: int
    empirical_fpr: float
    model_fpr: float
    ci_low: float
    ci_high: float
    runtime_ns_per_query: float = math.nan
    error: str | None = None

    def row(self, timing: bool = True) -> dict:
        return {
            "b": self.plan.b,
            "structure": self.structure.value,
            "b1": self.plan.b1,
            "b2": self.plan.b2,
            "model_fpr": self.model_fpr,
            "empirical_fpr": self.empirical_fpr,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "probes": self.probes,
            "ns_per_query": self.runtime_ns_per_query if timing else math.nan,
        }

    def to_json(self, timing: bool = True) -> dict:
        out = self.row(timing)
        out["false_positives"] = self.false_positives
        if self.oracle_profile is not None:
            out["oracle_profile"] = asdict(self.oracle_profile)
        out["error"] = self.error
        return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in out.items()}


def structure_kind(structure) -> Structure:
    if isinstance(structure, SandwichedFilter):
        return Structure.SANDWICHED
    if isinstance(structure, LearnedBloomFilter):
        return Structure.LEARNED
    if isinstance(structure, Filter):
        return Structure.PLAIN_BLOOM
    raise TypeError(f"not a measurable structure: {type(structure).__name__}")


def _answers(structure, keys) -> np.ndarray:
    if isinstance(structure, Filter):
        return structure.contains_many(keys)
    return structure.query_many(keys)


def layered_model_fpr(alpha: float, profile: OracleProfile, b1: float, b2: float) -> float:
    """Modeled FPR for a built structure; with no false negatives the backup is
    the empty filter, which rejects everything."""
    if profile.f_n == 0.0:
        return alpha**b1 * profile.f_p
    return model_false_positive_rate(ModelParams(alpha, profile.f_p, profile.f_n), b1, b2)


def _plan_for(structure, kind: Structure, m: int) -> BudgetPlan:
    if kind is Structure.SANDWICHED:
        return structure.plan
    if kind is Structure.LEARNED:
        return BudgetPlan(structure.b, 0.0, structure.b, m, structure.backup.backend.alpha)
    b = structure.bits_per_key
    return BudgetPlan(b, b, 0.0, m, structure.backend.alpha)


def measure_fpr(
    structure,
    test_negatives,
    positives,
    *,
    profile: OracleProfile | None = None,
    plan: BudgetPlan | None = None,
    model_fpr: float | None = None,
    workers: int = 1,
    chunk: int = 1 << 18,
) -> MeasurementReport:
    """Probe every test negative once and report the empirical FPR.

    All of ``positives`` are queried first; any "no" among them raises
    ``ContractViolation``.
    """
    kind = structure_kind(structure)
    positives = positives if isinstance(positives, KeyBatch) else KeyBatch(positives)
    negatives = test_negatives if isinstance(test_negatives, KeyBatch) else KeyBatch(test_negatives)
    if len(positives):
        missing = np.flatnonzero(~_answers(structure, positives))
        if missing.size:
            raise ContractViolation(
                f"{kind.value} rejected {missing.size} of its own keys "
                f"(first: {positives[int(missing[0])].hex()})"
            )
    if plan is None:
        plan = _plan_for(structure, kind, len(positives))
    if model_fpr is None:
        if kind is Structure.PLAIN_BLOOM:
            model_fpr = plan.alpha**plan.b if structure.n_keys else 0.0
        elif profile is None:
            model_fpr = math.nan
        else:
            model_fpr = layered_model_fpr(plan.alpha, profile, plan.b1, plan.b2)

    spans = [(i, min(i + chunk, len(negatives))) for i in range(0, len(negatives), chunk)]

    def count(span):
        return int(_answers(structure, negatives[span[0] : span[1]]).sum())

    start = time.perf_counter_ns()
    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(workers) as pool:
            counts = list(pool.map(count, spans))
    else:
        counts = [count(s) for s in spans]
    elapsed = time.perf_counter_ns() - start
    fp = sum(counts)
    probes = len(negatives)
    lo, hi = wilson_interval(fp, probes)
    return MeasurementReport(
        structure=kind,
        plan=plan,
        oracle_profile=profile,
        probes=probes,
        false_positives=fp,
        empirical_fpr=fp / probes if probes else math.nan,
        model_fpr=model_fpr,
        ci_low=lo,
        ci_high=hi,
        runtime_ns_per_query=elapsed / probes if probes else math.nan,
    )


def _failed(kind: Structure, plan: BudgetPlan, profile, model: float, exc: Exception):
    log.warning("building %s at b=%g failed: %s", kind.value, plan.b, exc)
    return MeasurementReport(kind, plan, profile, 0, 0, math.nan, model, math.nan, math.nan,
                             error=f"{type(exc).__name__}: {exc}")


def sweep(
    budgets: Sequence[float],
    params: ModelParams,
    workload: Workload,
    backend=Backend.FINGERPRINT_PH,
    *,
    oracle: Oracle | None = None,
    profile: OracleProfile | None = None,
    seed: int = 0,
    workers: int = 1,
) -> list[MeasurementReport]:
    """Plain, learned and optimally sandwiched structures at every budget.

    Without an explicit oracle a synthetic one is built from ``params``; its
    f_p is exact by construction and its f_n is the realized count / m.
    With an explicit oracle, ``profile`` (its measured rates) drives the
    model and the plan.
    """
    if not budgets:
        raise ValueError("budgets must be nonempty")
    if any(b < 0 for b in budgets):
        raise ValueError("budgets must be >= 0")
    backend = Backend.parse(backend)
    keys = workload.positives
    m = len(keys)
    if oracle is None:
        oracle = make_synthetic_oracle(keys, params.f_p, params.f_n, seed)
        n_fn = len(oracle.false_negatives)
        profile = OracleProfile(params.f_p, n_fn / m, oracle.size_bits, n_fn, m)
    elif profile is None:
        raise ValueError("an explicit oracle needs its measured profile")
    alpha = params.alpha
    reports = []
    for b in sorted(budgets):
        model_params = ModelParams(alpha, profile.f_p, profile.f_n, b)

        plain_plan = BudgetPlan(b, b, 0.0, m, alpha)
        try:
            plain = build_filter(keys, FilterConfig(backend, b, layer_seed(seed, PLAIN_SEED_OFFSET)))
            reports.append(measure_fpr(plain, workload.test_negatives, keys,
                                       plan=plain_plan, model_fpr=alpha**b, workers=workers))
        except (MPHFConstructionError, ValueError) as exc:
            reports.append(_failed(Structure.PLAIN_BLOOM, plain_plan, None, alpha**b, exc))

        learned_plan = BudgetPlan(b, 0.0, b, m, alpha)
        learned_model = layered_model_fpr(alpha, profile, 0.0, b)
        try:
            learned = build_learned(keys, oracle, 0.0, backend, seed=seed,
                                    total_bits=round_half_up(b * m))
            reports.append(measure_fpr(learned, workload.test_negatives, keys, profile=profile,
                                       plan=learned_plan, model_fpr=learned_model, workers=workers))
        except (MPHFConstructionError, ValueError) as exc:
            reports.append(_failed(Structure.LEARNED, learned_plan, profile, learned_model, exc))

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", PlannerWarning)
            plan = replace(optimize_backup_bits(model_params), m=m)
        sandwich_model = layered_model_fpr(alpha, profile, plan.b1, plan.b2)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                sandwiched = build_sandwiched(keys, oracle, plan, backend, seed=seed)
            reports.append(measure_fpr(sandwiched, workload.test_negatives, keys, profile=profile,
                                       plan=plan, model_fpr=sandwich_model, workers=workers))
        except (MPHFConstructionError, ValueError) as exc:
            reports.append(_failed(Structure.SANDWICHED, plan, profile, sandwich_model, exc))
    reports.sort(key=lambda r: (r.plan.b, r.structure.rank))
    return reports


def _fmt(v) -> str:
    if isinstance(v, float):
        return "" if math.isnan(v) else f"{v:.10g}"
    return str(v)


def reports_to_csv(reports: Sequence[MeasurementReport], timing: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in reports:
        row = r.row(timing)
        writer.writerow([_fmt(row[c]) for c in CSV_HEADER])
    return buf.getvalue()


def reports_to_json(reports: Sequence[MeasurementReport], timing: bool = True) -> str:
    return json.dumps([r.to_json(timing) for r in reports], indent=2) + "\n"


def format_table(reports: Sequence[MeasurementReport]) -> str:
    head = f"{'b':>6} {'structure':<12} {'b1':>8} {'b2':>8} {'model':>11} {'empirical':>11} {'95% CI':>25} {'probes':>9}"
    lines = [head, "-" * len(head)]
    for r in reports:
        if r.error:
            lines.append(f"{r.plan.b:>6g} {r.structure.value:<12} failed: {r.error}")
            continue
        ci = f"[{r.ci_low:.3g}, {r.ci_high:.3g}]"
        lines.append(
            f"{r.plan.b:>6g} {r.structure.value:<12} {r.plan.b1:>8.4f} {r.plan.b2:>8.4f} "
            f"{r.model_fpr:>11.6g} {r.empirical_fpr:>11.6g} {ci:>25} {r.probes:>9}"
        )
    return "\n".join(lines)
