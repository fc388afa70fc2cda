"""Numerical options shared by the growth engine and the run configuration."""

from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from slg_lab.constants import (
    CLOCK_SKEW_LIMIT,
    CUSP_TOL,
    DEFAULT_GRID_M,
    MAX_DT_HALVINGS,
    MERGE_DISTANCE,
    NEWTON_MAX_ITER,
    NEWTON_TOL,
)


class Tolerances(BaseModel):
    """Solver, cusp and clock-skew bounds."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    newton: float = Field(default=NEWTON_TOL, gt=0)
    newton_max_iter: int = Field(default=NEWTON_MAX_ITER, ge=1)
    cusp: float = Field(default=CUSP_TOL, gt=0, lt=1)
    clock_skew: float = Field(default=CLOCK_SKEW_LIMIT, gt=0)
    max_dt_halvings: int = Field(default=MAX_DT_HALVINGS, ge=0)


class PruneConfig(BaseModel):
    """Term pruning; terms with |coeff| < tau are dropped after merging near-duplicates."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    tau: float = Field(default=0.0, ge=0)
    merge_distance: float = Field(default=MERGE_DISTANCE, ge=0)


class TimeChangeConfig(BaseModel):
    """Auxiliary clock rule: exact |w'|^2 at the anchors, or the fractal fallback."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    mode: Literal["exact", "fractal"] = "exact"
    alpha: float = Field(default=1.0, gt=0)
    eps: Optional[List[float]] = None


class StepOptions(BaseModel):
    """Everything grow_step needs besides the state, the noise and the rates."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    mode: Literal["deterministic", "stochastic"] = "stochastic"
    driver_mode: Literal["conjugate_slice", "literal_double"] = "conjugate_slice"
    kappa: float = Field(default=0.0, ge=0)
    grid_m: int = DEFAULT_GRID_M
    generalized: bool = False
    time_change: TimeChangeConfig = TimeChangeConfig()
    prune: Optional[PruneConfig] = None
