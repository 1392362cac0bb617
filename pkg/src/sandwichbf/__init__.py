"""Learned and sandwiched learned Bloom filters with optimal bit budgeting."""

from sandwichbf.errors import (
    ConfigError,
    ContractViolation,
    FormatError,
    MPHFConstructionError,
)
from sandwichbf.filters import (
    Backend,
    BloomFilter,
    FilterConfig,
    FingerprintFilter,
    KeyBatch,
    KeySet,
    alpha,
    build_filter,
    deserialize,
    serialize,
)
from sandwichbf.harness import (
    MeasurementReport,
    Workload,
    generate_workload,
    measure_fpr,
    sweep,
    wilson_interval,
)
from sandwichbf.oracle import (
    Oracle,
    OracleProfile,
    ScoreOracle,
    SyntheticOracle,
    choose_tau,
    make_synthetic_oracle,
    measure_profile,
    train_score_oracle,
)
from sandwichbf.planner import (
    BudgetPlan,
    ModelParams,
    crossover_level,
    grid_search_allocation,
    model_false_positive_rate,
    optimal_backup_bits,
    optimize_backup_bits,
    select_best_oracle,
)
from sandwichbf.sandwich import (
    LearnedBloomFilter,
    SandwichedFilter,
    build_learned,
    build_sandwiched,
    load_structure,
)

__version__ = "0.1.0"

__all__ = [
    "alpha",
    "Backend",
    "BloomFilter",
    "BudgetPlan",
    "build_filter",
    "build_learned",
    "build_sandwiched",
    "choose_tau",
    "ConfigError",
    "ContractViolation",
    "crossover_level",
    "deserialize",
    "FilterConfig",
    "FingerprintFilter",
    "FormatError",
    "generate_workload",
    "grid_search_allocation",
    "KeyBatch",
    "KeySet",
    "LearnedBloomFilter",
    "load_structure",
    "make_synthetic_oracle",
    "measure_fpr",
    "measure_profile",
    "MeasurementReport",
    "model_false_positive_rate",
    "ModelParams",
    "MPHFConstructionError",
    "optimal_backup_bits",
    "optimize_backup_bits",
    "Oracle",
    "OracleProfile",
    "SandwichedFilter",
    "ScoreOracle",
    "select_best_oracle",
    "serialize",
    "sweep",
    "SyntheticOracle",
    "train_score_oracle",
    "wilson_interval",
    "Workload",
]
