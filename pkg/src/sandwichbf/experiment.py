"""Glue from an ExperimentConfig to workloads, oracles and structures."""

from __future__ import annotations

import math

import numpy as np

from sandwichbf.config import ExperimentConfig
from sandwichbf.errors import ConfigError
from sandwichbf.filters import FilterConfig, KeySet, build_filter
from sandwichbf.filters.base import round_half_up
from sandwichbf.harness import PLAIN_SEED_OFFSET, Structure, Workload, generate_workload
from sandwichbf.oracle import (
    Oracle,
    OracleProfile,
    choose_tau,
    make_synthetic_oracle,
    measure_profile,
    train_score_oracle,
)
from sandwichbf.planner import ModelParams, optimize_backup_bits
from sandwichbf.sandwich import build_learned, build_sandwiched, layer_seed


def workload_for(cfg: ExperimentConfig, *, negatives: bool = True) -> Workload:
    return generate_workload(
        cfg.m,
        cfg.train_negatives if negatives or cfg.oracle.kind == "score" else 0,
        cfg.n_test_neg if negatives else 0,
        cfg.key_len,
        cfg.seed,
    )


def _untagged(keys, exclude=frozenset()) -> KeySet:
    # the role byte would let the oracle tell negative sets apart by origin
    out = dict.fromkeys(k[1:] for k in keys.keys if len(k) > 1)
    return KeySet([k for k in out if k not in exclude], _checked=True)


def oracle_for(cfg: ExperimentConfig, wl: Workload) -> tuple[Oracle, OracleProfile]:
    """The configured oracle and the profile that drives planning.

    Synthetic oracles use the configured f_p (exact per fresh key) and the
    realized f_n. Score oracles train on the first half of the training
    negatives, with role bytes stripped, and are profiled on the second half.
    """
    params = dict(cfg.oracle.params)
    m = len(wl.positives)
    if cfg.oracle.kind == "synthetic":
        seed = int(params.pop("seed", cfg.seed))
        size_bits = int(params.pop("size_bits", 0))
        if params:
            raise ConfigError(f"unknown synthetic oracle params: {sorted(params)}")
        oracle = make_synthetic_oracle(wl.positives, cfg.f_p, cfg.f_n, seed)
        oracle.size_bits = size_bits
        n_fn = len(oracle.false_negatives)
        return oracle, OracleProfile(cfg.f_p, n_fn / m, size_bits, n_fn, m)
    smoothing = float(params.pop("smoothing", 1.0))
    target = float(params.pop("target_f_n", cfg.f_n))
    if params:
        raise ConfigError(f"unknown score oracle params: {sorted(params)}")
    negs = wl.train_negatives
    if len(negs) < 2:
        raise ConfigError("score oracle needs at least two training negatives")
    half = len(negs) // 2
    fit, held_out = negs.take(np.arange(half)), negs.take(np.arange(half, len(negs)))
    pos = _untagged(wl.positives)
    oracle = train_score_oracle(pos, _untagged(fit, exclude=set(pos.keys)), smoothing)
    oracle = choose_tau(oracle, wl.positives, target)
    return oracle, measure_profile(oracle, wl.positives, held_out)


def build_structure(cfg: ExperimentConfig, wl: Workload, kind: Structure, b: float,
                    oracle: Oracle | None = None, profile: OracleProfile | None = None):
    keys = wl.positives
    if kind is Structure.PLAIN_BLOOM:
        return build_filter(keys, FilterConfig(cfg.backend, b, layer_seed(cfg.seed, PLAIN_SEED_OFFSET)))
    if oracle is None:
        oracle, profile = oracle_for(cfg, wl)
    if kind is Structure.LEARNED:
        return build_learned(keys, oracle, 0.0, cfg.backend, seed=cfg.seed,
                             total_bits=round_half_up(b * len(keys)))
    plan = optimize_backup_bits(ModelParams(cfg.backend.alpha, profile.f_p, profile.f_n, b))
    return build_sandwiched(keys, oracle, plan, cfg.backend, seed=cfg.seed)


def model_params(cfg: ExperimentConfig, profile: OracleProfile) -> ModelParams:
    return ModelParams(cfg.backend.alpha, profile.f_p, profile.f_n)


def finite(x: float) -> float | None:
    return None if math.isnan(x) else x
