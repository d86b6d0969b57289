#!/usr/bin/env python3
"""
Experiment models for the FOSI optimizer lab
Validated configuration objects deserialized from experiment spec files
"""

import math
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing_extensions import Self


class FosiConfig(BaseModel):
    """FOSI hyperparameters

    ``T`` is an iteration count, ``"auto"`` (overhead heuristic from ``rho``) or
    ``"measured"`` (overhead from timing runs). ``W`` is an iteration count,
    ``"epoch"`` or ``"T"``. ``c`` accepts a number, ``"inf"`` or null for no clipping.
    ``alpha`` left unset means 1.0 for deterministic and 0.01 for stochastic problems.
    """

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    k: int = Field(default=10, ge=0)
    l: int = Field(default=0, ge=0)
    alpha: Optional[float] = Field(default=None, gt=0.0, le=1.0)
    T: Union[int, Literal["auto", "measured"]] = "auto"
    rho: float = Field(default=1.1, gt=1.0)
    W: Union[int, Literal["epoch", "T"]] = 0
    c: float = math.inf
    seed: int = 0
    timing_iterations: int = Field(default=5, ge=1)

    @field_validator("c", mode="before")
    @classmethod
    def _parse_clip(cls, value: Any) -> Any:
        if value is None or (isinstance(value, str) and value.lower() in ("inf", "infinity")):
            return math.inf
        return value

    @field_validator("c")
    @classmethod
    def _check_clip(cls, value: float) -> float:
        if not value >= 1.0:
            raise ValueError("c must be >= 1")
        return value

    @field_validator("T")
    @classmethod
    def _check_interval(cls, value):
        if isinstance(value, int) and value < 1:
            raise ValueError("T must be a positive iteration count")
        return value

    @field_validator("W")
    @classmethod
    def _check_warmup(cls, value):
        if isinstance(value, int) and value < 0:
            raise ValueError("W must be nonnegative")
        return value

    @model_validator(mode="after")
    def _check_block_sizes(self) -> Self:
        if self.k + self.l < 1:
            raise ValueError("k + l must be at least 1")
        return self


class StoppingRule(BaseModel):
    """Iteration budget and optional gradient-norm threshold

    ``epochs`` is converted to iterations for stochastic problems.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    max_iterations: Optional[int] = Field(default=None, ge=1)
    epochs: Optional[int] = Field(default=None, ge=1)
    grad_tol: Optional[float] = Field(default=None, gt=0.0)

    @model_validator(mode="after")
    def _check_budget(self) -> Self:
        if self.max_iterations is None and self.epochs is None:
            raise ValueError("budget needs max_iterations or epochs")
        return self

    def iterations(self, steps_per_epoch: Optional[int] = None) -> int:
        if self.max_iterations is not None:
            return self.max_iterations
        if steps_per_epoch is None:
            raise ValueError("epoch budgets require a stochastic problem with a batch size")
        return self.epochs * steps_per_epoch


class ProblemSpec(BaseModel):
    """Problem family, its parameters and seeds"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    family: str
    params: Dict[str, Any] = Field(default_factory=dict)
    seed: int = 0
    batch_size: Optional[int] = Field(default=None, ge=1)
    ese_batch_size: Optional[int] = Field(default=None, ge=1)
    batch_seed: Optional[int] = None

    @property
    def is_stochastic(self) -> bool:
        return self.batch_size is not None


class OptimizerSpec(BaseModel):
    """One optimizer run; ``fosi`` set means FOSI wrapped around the base kind

    ``lr`` may be ``"optimal"`` for GD/HB on problems with a known spectrum.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    id: Optional[str] = None
    kind: Literal["gd", "hb", "adam"]
    lr: Union[float, Literal["optimal"]]
    momentum: Optional[float] = Field(default=None, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    eps: float = Field(default=1e-8, gt=0.0)
    fosi: Optional[FosiConfig] = None

    @field_validator("lr")
    @classmethod
    def _check_lr(cls, value):
        if isinstance(value, (int, float)) and not value > 0:
            raise ValueError("lr must be positive")
        return value

    @model_validator(mode="after")
    def _check_optimal_lr(self) -> Self:
        if self.lr == "optimal" and self.kind == "adam":
            raise ValueError("Adam has no closed-form optimal learning rate")
        return self

    @property
    def is_fosi(self) -> bool:
        return self.fosi is not None

    @property
    def run_id(self) -> str:
        if self.id:
            return self.id
        return f"fosi-{self.kind}" if self.is_fosi else self.kind


class OutputSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    directory: str = "results"
    record_every: int = Field(default=1, ge=1)
    record_timing: bool = False
    max_workers: Optional[int] = Field(default=None, ge=1)
    plot: bool = False


class SweepSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    learning_rates: List[float] = Field(default_factory=list)
    momenta: Optional[List[float]] = None

    @field_validator("learning_rates")
    @classmethod
    def _check_rates(cls, value: List[float]) -> List[float]:
        if any(not rate > 0 for rate in value):
            raise ValueError("learning rates must be positive")
        return value


class SummarySpec(BaseModel):
    """``threshold`` is a loss value or ``"baseline_best"``"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    threshold: Optional[Union[float, Literal["baseline_best"]]] = "baseline_best"
    baseline: Optional[str] = None


class ExperimentSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = "experiment"
    problem: ProblemSpec
    optimizers: List[OptimizerSpec] = Field(min_length=1)
    budget: StoppingRule
    output: OutputSpec = Field(default_factory=OutputSpec)
    sweep: Optional[SweepSpec] = None
    summary: SummarySpec = Field(default_factory=SummarySpec)

    @model_validator(mode="after")
    def _check_ids(self) -> Self:
        ids = [opt.run_id for opt in self.optimizers]
        duplicates = sorted({run_id for run_id in ids if ids.count(run_id) > 1})
        if duplicates:
            raise ValueError(f"duplicate optimizer ids {duplicates}; set explicit 'id' fields")
        if self.summary.baseline is not None and self.summary.baseline not in ids:
            raise ValueError(f"summary baseline '{self.summary.baseline}' is not an optimizer id")
        return self
