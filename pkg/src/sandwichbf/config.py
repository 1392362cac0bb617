"""Experiment configuration (one JSON document)."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from sandwichbf.errors import ConfigError
from sandwichbf.filters import Backend


class OracleSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["synthetic", "score"] = "synthetic"
    params: dict[str, Any] = Field(default_factory=dict)


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(0, ge=0, lt=1 << 64)
    m: int = Field(ge=1)
    key_len: int = Field(16, ge=2, le=4096)
    n_test_neg: int = Field(1_000_000, ge=1)
    n_train_neg: int | None = Field(None, ge=1)
    alpha_backend: Union[float, str] = "fingerprint"
    f_p: float = Field(0.01, ge=0.0, le=1.0)
    f_n: float = Field(0.5, ge=0.0, le=1.0)
    budgets: list[float] = Field(default_factory=lambda: [8.0], min_length=1)
    oracle: OracleSpec = Field(default_factory=OracleSpec)

    @field_validator("budgets")
    @classmethod
    def _nonnegative(cls, v: list[float]) -> list[float]:
        if any(b < 0 for b in v):
            raise ValueError("budgets must be >= 0")
        return v

    @field_validator("alpha_backend")
    @classmethod
    def _known_backend(cls, v):
        backend_of(v)
        return v

    @property
    def backend(self) -> Backend:
        return backend_of(self.alpha_backend)

    @property
    def train_negatives(self) -> int:
        return self.n_train_neg if self.n_train_neg is not None else self.n_test_neg


def backend_of(value) -> Backend:
    """Backend from a name or from its alpha (0.5 or ~0.6185)."""
    if isinstance(value, str):
        try:
            return Backend.parse(value)
        except ValueError:
            try:
                value = float(value)
            except ValueError:
                raise ValueError(f"unknown backend {value!r}") from None
    for backend in Backend:
        if abs(float(value) - backend.alpha) < 1e-3:
            return backend
    raise ValueError(f"no backend has alpha {value}")


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"invalid config {path}:\n{exc}") from exc
