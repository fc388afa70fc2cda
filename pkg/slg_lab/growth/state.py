"""Growth state, per-step reports and initial conditions."""

import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from slg_lab.conformal.mapping import (
    ConformalMap,
    LogTerm,
    area_closed_form,
    singularity_targets,
    translation_invariant,
)
from slg_lab.drivers.sde import DriverState, initial_driver_state

logger = logging.getLogger(__name__)

PERTURBATION = "perturbation"
DRIVER = "driver"


@dataclass(frozen=True)
class TermOrigin:
    """Where a log term came from: an initial perturbation or driver ``driver`` at ``step``."""

    kind: str
    index: int
    step: int = 0


@dataclass(frozen=True)
class GrowthState:
    """Map, drivers and conserved targets after ``step`` accepted steps.

    ``targets`` and ``origins`` are aligned with ``map.terms``; ``dzeta_prev`` holds the
    last z-plane increment of each virtual source (None before its first step).
    """

    map: ConformalMap
    drivers: DriverState
    t: float
    step: int
    targets: Tuple[complex, ...]
    origins: Tuple[TermOrigin, ...]
    tau_target: complex
    area0: float
    initial_radius: float
    dzeta_prev: Tuple[Optional[complex], ...] = ()
    coeff_history: Tuple[Tuple[complex, ...], ...] = ()
    pruned_total: int = 0

    def __post_init__(self):
        if len(self.targets) != len(self.map.terms) or len(self.origins) != len(self.map.terms):
            raise ValueError("targets and origins must be aligned with the map terms")
        if not self.dzeta_prev:
            object.__setattr__(self, "dzeta_prev", (None,) * self.drivers.n)

    @property
    def targets_beta(self) -> Tuple[complex, ...]:
        return tuple(v for v, o in zip(self.targets, self.origins) if o.kind == PERTURBATION)

    @property
    def targets_gamma(self) -> Tuple[complex, ...]:
        return tuple(v for v, o in zip(self.targets, self.origins) if o.kind == DRIVER)

    @property
    def n_terms(self) -> int:
        return len(self.map.terms)

    def area_target(self, bigQ: float, t: Optional[float] = None) -> float:
        return self.area0 + bigQ * (self.t if t is None else t)

    def circle_radius(self, bigQ: float) -> float:
        """Radius of the exact circular solution at the current time."""
        return float(np.sqrt(self.initial_radius**2 + bigQ * self.t / np.pi))


@dataclass(frozen=True)
class StepReport:
    """Diagnostics of one accepted (or failed) step."""

    step: int
    t: float
    dt_used: float
    newton_iters: int
    max_residual: float
    min_density: float
    area_closed_form: float
    area_quadrature: float
    pruned_terms: int = 0
    radius: float = 0.0
    circle_radius: float = 0.0
    schwarz_residual: float = 0.0
    min_dz: float = 0.0
    n_terms: int = 0
    halvings: int = 0
    dW: float = 0.0
    dq: Tuple[float, ...] = field(default_factory=tuple)
    singularity_violations: int = 0

    def to_dict(self) -> Dict[str, Any]:
        record = asdict(self)
        record["dq"] = list(self.dq)
        return record


def initial_state(
    initial_radius: float,
    perturbations: Sequence[Tuple[complex, complex]] = (),
    xis: Sequence[complex] = (),
    anchors: Optional[Sequence[complex]] = None,
) -> GrowthState:
    """Circle of radius r0 with K perturbation terms and N drivers at rest.

    Args:
        initial_radius: Conformal radius r0
        perturbations: (coeff, sing) pairs of the initial log terms
        xis: Initial driving points
        anchors: Fjord-tip anchors; default z_0(1/conj(xi_n))

    Returns:
        GrowthState at t = 0
    """
    terms = tuple(LogTerm(complex(c), complex(a)) for c, a in perturbations)
    cmap = ConformalMap(radius=float(initial_radius), terms=terms)
    drivers = initial_driver_state(cmap, xis, anchors)
    targets = tuple(complex(v) for v in singularity_targets(cmap))
    origins = tuple(TermOrigin(PERTURBATION, k) for k in range(len(terms)))
    state = GrowthState(
        map=cmap,
        drivers=drivers,
        t=0.0,
        step=0,
        targets=targets,
        origins=origins,
        tau_target=translation_invariant(cmap),
        area0=area_closed_form(cmap),
        initial_radius=float(initial_radius),
    )
    logger.debug(f"Initial state: r0={initial_radius}, K={len(terms)}, N={drivers.n}")
    return state
