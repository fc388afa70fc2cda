"""Run configuration: one JSON document, validated by pydantic."""

import json
import logging
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, computed_field, model_validator

from slg_lab.constants import DEFAULT_DRIVER_RADIUS, DEFAULT_GRID_M
from slg_lab.drivers.noise import NoiseStream
from slg_lab.drivers.sde import RateParams
from slg_lab.errors import ConfigError
from slg_lab.growth.options import PruneConfig, StepOptions, TimeChangeConfig, Tolerances

logger = logging.getLogger(__name__)

Pair = Tuple[float, float]
CHECKS = ("mean_M", "prop2_cov", "corollary")


def _as_complex(pair: Pair) -> complex:
    return complex(pair[0], pair[1])


class PerturbationSpec(BaseModel):
    """Initial log term coeff * log(1 - sing / w), both given as [re, im]."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    coeff: Pair
    sing: Pair

    @model_validator(mode="after")
    def _sing_inside(self):
        if abs(_as_complex(self.sing)) >= 1:
            raise ValueError(f"Perturbation singularity {self.sing} must lie inside the unit disk")
        return self

    @property
    def pair(self) -> Tuple[complex, complex]:
        return _as_complex(self.coeff), _as_complex(self.sing)


class RunConfig(BaseModel):
    """Everything that determines a run; identical configs give identical outputs."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    bigQ: float = Field(default=1.0, gt=0)
    nu: float = Field(default=0.04, gt=0)
    kappa: float = Field(default=6.0, ge=0)
    n_drivers: int = Field(default=0, ge=0)
    alphas: List[float] = Field(default_factory=list)
    initial_radius: float = Field(default=1.0, gt=0)
    initial_perturbations: List[PerturbationSpec] = Field(default_factory=list)
    initial_drivers: Optional[List[Pair]] = None
    anchors: Optional[List[Pair]] = None
    dt: float = Field(default=1e-3, gt=0)
    steps: int = Field(default=100, ge=0)
    snapshot_every: int = Field(default=10, ge=1)
    grid_m: int = DEFAULT_GRID_M
    seed: int = Field(default=0, ge=0, lt=2**64)
    mode: Literal["deterministic", "stochastic"] = "stochastic"
    driver_mode: Literal["conjugate_slice", "literal_double"] = "conjugate_slice"
    generalized_drivers: bool = False
    tolerances: Tolerances = Tolerances()
    prune: Optional[PruneConfig] = None
    time_change: TimeChangeConfig = TimeChangeConfig()
    workers: int = Field(default=1, ge=1)
    executor: Literal["process", "thread"] = "process"
    checks: List[Literal["mean_M", "prop2_cov", "corollary"]] = Field(
        default_factory=lambda: list(CHECKS)
    )
    n_paths: int = Field(default=1000, ge=1)
    check_steps: int = Field(default=1, ge=1)
    pair_driver_modes: bool = True

    @model_validator(mode="after")
    def _consistent(self):
        if len(self.alphas) != self.n_drivers:
            raise ValueError(f"Need {self.n_drivers} alphas, got {len(self.alphas)}")
        if any(a <= 0 for a in self.alphas):
            raise ValueError("All alphas must be positive")
        if self.grid_m < 8 or self.grid_m & (self.grid_m - 1):
            raise ValueError(f"grid_m must be a power of two >= 8, got {self.grid_m}")
        if self.initial_drivers is not None:
            if len(self.initial_drivers) != self.n_drivers:
                raise ValueError("initial_drivers must list one point per driver")
            if any(abs(_as_complex(p)) >= 1 for p in self.initial_drivers):
                raise ValueError("initial_drivers must lie inside the unit disk")
        if self.anchors is not None and len(self.anchors) != self.n_drivers:
            raise ValueError("anchors must list one point per driver")
        return self

    @computed_field
    @property
    def sigma(self) -> float:
        return self.bigQ / (2 * np.pi * self.nu) + 0.5 * sum(self.alphas)

    def driver_points(self) -> List[complex]:
        """Initial driving points; default is evenly spaced on the radius-0.5 circle."""
        if self.initial_drivers is not None:
            return [_as_complex(p) for p in self.initial_drivers]
        n = self.n_drivers
        return [complex(DEFAULT_DRIVER_RADIUS * np.exp(2j * np.pi * k / n)) for k in range(n)]

    def anchor_points(self) -> Optional[List[complex]]:
        return None if self.anchors is None else [_as_complex(p) for p in self.anchors]

    def perturbation_pairs(self) -> List[Tuple[complex, complex]]:
        return [p.pair for p in self.initial_perturbations]

    def rate_params(self) -> RateParams:
        return RateParams.from_config(self)

    def step_options(self) -> StepOptions:
        return StepOptions(
            mode=self.mode,
            driver_mode=self.driver_mode,
            kappa=self.kappa,
            grid_m=self.grid_m,
            generalized=self.generalized_drivers,
            time_change=self.time_change,
            prune=self.prune,
        )

    def noise(self, path_index: int = 0) -> NoiseStream:
        return NoiseStream(seed=self.seed, path_index=path_index, kappa=self.kappa)

    def echo(self) -> dict:
        """JSON-ready dump including the derived sigma."""
        return self.model_dump(mode="json")


def with_overrides(config: RunConfig, **updates) -> RunConfig:
    """Apply non-None overrides and re-validate.

    Raises:
        ConfigError: If the overridden configuration is invalid
    """
    updates = {k: v for k, v in updates.items() if v is not None}
    if not updates:
        return config
    data = config.model_dump(exclude={"sigma"})
    data.update(updates)
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid override: {str(e)}", overrides=sorted(updates))


def parse_config(data: dict) -> RunConfig:
    """Validate a config mapping; a ``sigma`` echo from a manifest is ignored.

    Raises:
        ConfigError: If validation fails
    """
    data = dict(data)
    data.pop("sigma", None)
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {str(e)}",
                          fields=[".".join(str(p) for p in err["loc"]) for err in e.errors()])


def load_config(path: Union[str, Path]) -> RunConfig:
    """Read and validate a JSON config file.

    Raises:
        ConfigError: If the file cannot be read, is not JSON, or fails validation
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {str(e)}", path=str(path))
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config {path} is not valid JSON: {str(e)}", path=str(path))
    if not isinstance(data, dict):
        raise ConfigError(f"Config {path} must be a JSON object", path=str(path))
    config = parse_config(data)
    logger.info(f"Loaded config {path} (sigma={config.sigma:.6g})")
    return config
