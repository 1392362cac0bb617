"""False-positive model and bit-budget allocation for sandwiched filters.

A sandwiched learned Bloom filter spends ``b`` bits per positive key: ``b1``
on an initial filter over every key and ``b2`` on a backup filter that only
stores the oracle's false negatives (an ``f_n`` fraction), so the backup
runs at ``b2 / f_n`` bits per stored key. With filters whose FPR decays as
``alpha ** bits`` the overall rate is

    alpha**b1 * (f_p + (1 - f_p) * alpha**(b2 / f_n))

and the best backup size does not depend on ``b`` at all once it fits.
"""

from __future__ import annotations

import math
import warnings
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np


class PlannerWarning(UserWarning):
    """A degenerate oracle made the closed-form allocation inapplicable."""


@dataclass(frozen=True)
class ModelParams:
    alpha: float
    f_p: float
    f_n: float
    b: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        for name in ("f_p", "f_n"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if not self.b >= 0.0:
            raise ValueError(f"b must be >= 0, got {self.b}")


@dataclass(frozen=True)
class BudgetPlan:
    """Bits per positive key for each filter layer; ``fpr`` is the modeled rate."""

    b: float
    b1: float
    b2: float
    m: int = 0
    alpha: float = 0.5
    fpr: float = field(default=math.nan, compare=False)

    def __post_init__(self) -> None:
        if self.b1 < 0 or self.b2 < 0:
            raise ValueError(f"allocations must be >= 0, got b1={self.b1}, b2={self.b2}")
        if self.b1 + self.b2 > self.b + 1e-9:
            raise ValueError(f"b1 + b2 = {self.b1 + self.b2} exceeds budget b = {self.b}")


def model_false_positive_rate(
    params: ModelParams, b1: float, b2: float, *, limit_convention: bool = False
) -> float:
    """Modeled FPR of an (initial, oracle, backup) sandwich.

    With ``f_n == 0`` the backup stores nothing and its rate is undefined;
    under ``limit_convention`` it counts as 0 for ``b2 > 0`` and as
    always-yes for ``b2 == 0``.
    """
    if b1 < 0 or b2 < 0:
        raise ValueError("b1 and b2 must be >= 0")
    a, f_p, f_n = params.alpha, params.f_p, params.f_n
    if f_n == 0.0:
        if b2 > 0 and not limit_convention:
            raise ValueError("f_n = 0 with b2 > 0 is undefined; pass limit_convention=True")
        backup = 0.0 if b2 > 0 else 1.0
    else:
        backup = a ** (b2 / f_n)
    return a**b1 * (f_p + (1.0 - f_p) * backup)


def optimal_backup_bits(alpha: float, f_p: float, f_n: float) -> float:
    """Unclamped stationary point b2* = f_n * log_alpha(f_p / ((1 - f_p)(1/f_n - 1)))."""
    if not (0.0 < f_p < 1.0 and 0.0 < f_n < 1.0):
        raise ValueError("closed form needs f_p and f_n strictly inside (0, 1)")
    log_ratio = math.log(f_p) - math.log1p(-f_p) - math.log((1.0 - f_n) / f_n)
    return f_n * log_ratio / math.log(alpha)


def _plan(params: ModelParams, b2: float) -> BudgetPlan:
    b2 = min(max(b2, 0.0), params.b)
    b1 = params.b - b2
    fpr = model_false_positive_rate(params, b1, b2, limit_convention=True)
    return BudgetPlan(b=params.b, b1=b1, b2=b2, alpha=params.alpha, fpr=fpr)


def _best_endpoint(params: ModelParams, reason: str) -> BudgetPlan:
    # in every degenerate corner the model is monotone in b2 along b1 + b2 = b
    warnings.warn(reason, PlannerWarning, stacklevel=3)
    low, high = _plan(params, 0.0), _plan(params, params.b)
    return high if high.fpr <= low.fpr else low


def optimize_backup_bits(params: ModelParams) -> BudgetPlan:
    """Split ``params.b`` into (b1, b2) minimizing the modeled FPR.

    With ``f_n == 0`` the backup holds no keys, so it is built empty and
    rejects everything; the plan puts no bits there and reports
    ``alpha**b * f_p``. Other boundary rates pick whichever end of the
    budget the model prefers and emit a :class:`PlannerWarning`.
    """
    f_p, f_n = params.f_p, params.f_n
    if f_n == 0.0:
        return BudgetPlan(
            b=params.b, b1=params.b, b2=0.0, alpha=params.alpha,
            fpr=params.alpha**params.b * f_p,
        )
    if f_n == 1.0:
        return _best_endpoint(params, "f_n = 1: the oracle accepts no keys")
    if f_p == 1.0:
        return _best_endpoint(params, "f_p = 1: the oracle rejects nothing")
    if f_p == 0.0:
        return _best_endpoint(params, "f_p = 0: closed form diverges, using the better budget endpoint")
    return _plan(params, optimal_backup_bits(params.alpha, f_p, f_n))


def grid_search_allocation(params: ModelParams, step: float) -> BudgetPlan:
    """Brute-force the split over b2 in {0, step, 2*step, ..., b}."""
    if not 0.0 < step:
        raise ValueError("step must be positive")
    b = params.b
    count = int(math.floor(b / step + 1e-9))
    b2 = np.arange(count + 1, dtype=np.float64) * step
    if b2[-1] < b - 1e-12:
        b2 = np.append(b2, b)
    b2 = np.minimum(b2, b)
    b1 = b - b2
    a, f_p, f_n = params.alpha, params.f_p, params.f_n
    if f_n == 0.0:
        backup = np.where(b2 > 0, 0.0, 1.0)
    else:
        backup = a ** (b2 / f_n)
    fpr = a**b1 * (f_p + (1.0 - f_p) * backup)
    best = int(np.argmin(fpr))  # first minimum: ties go to smaller b2
    return BudgetPlan(b=b, b1=float(b1[best]), b2=float(b2[best]), alpha=a, fpr=float(fpr[best]))


def crossover_level(params: ModelParams) -> float:
    """Backup leakage rate at which extra bits start paying more in the initial filter."""
    if not 0.0 < params.f_n < 1.0:
        raise ValueError("crossover level needs f_n strictly inside (0, 1)")
    return params.f_p / (1.0 / params.f_n - 1.0)


def select_best_oracle(profiles: Sequence, alpha: float, b: float) -> tuple[int, BudgetPlan]:
    """Pick the oracle profile whose optimized sandwich has the lowest modeled FPR.

    Ties go to the smaller oracle (``size_bits``), then the earlier profile.
    """
    if not profiles:
        raise ValueError("need at least one oracle profile")
    best_key, best = None, None
    for i, prof in enumerate(profiles):
        params = ModelParams(alpha, prof.f_p, prof.f_n, b)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", PlannerWarning)
            plan = optimize_backup_bits(params)
        key = (plan.fpr, getattr(prof, "size_bits", 0), i)
        if best_key is None or key < best_key:
            best_key, best = key, (i, plan)
    return best
