"""Whole-run orchestration of the growth engine."""

import logging
from dataclasses import asdict, dataclass, field, replace
from typing import TYPE_CHECKING, Any, Dict, List, Optional

from slg_lab.constants import SINGULARITY_WINDOW
from slg_lab.errors import NumericalError, error_record
from slg_lab.growth.engine import grow_step, source_points
from slg_lab.growth.state import GrowthState, StepReport, TermOrigin, initial_state

if TYPE_CHECKING:
    from slg_lab.cli.config import RunConfig

logger = logging.getLogger(__name__)

COMPLETED = "completed"
ABORTED = "aborted"


@dataclass(frozen=True)
class SingularityViolation:
    """A log singularity that moved away from the unit circle over one window."""

    step: int
    kind: str
    index: int
    origin_step: int
    gap_start: float
    gap_end: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class SimulationResult:
    """Snapshots, per-step reports and virtual-source paths of one trajectory."""

    snapshots: List[GrowthState] = field(default_factory=list)
    reports: List[StepReport] = field(default_factory=list)
    zeta_paths: List[List[complex]] = field(default_factory=list)
    termination: str = COMPLETED
    error: Optional[Dict[str, Any]] = None
    failed_step: Optional[int] = None
    failed_report: Optional[StepReport] = None
    singularity_violations: List[SingularityViolation] = field(default_factory=list)

    @property
    def final_state(self) -> GrowthState:
        return self.snapshots[-1]

    @property
    def completed(self) -> bool:
        return self.termination == COMPLETED


class SingularityMonitor:
    """Checks that every retained singularity gets closer to the unit circle.

    Distances 1 - |a| are compared between the first and the last step of each
    window; terms are matched by their origin, so pruned or merged terms drop out.
    """

    def __init__(self, cusp: float, window: int = SINGULARITY_WINDOW):
        if window < 1:
            raise ValueError(f"Window must be at least one step, got {window}")
        self.cusp = cusp
        self.window = window
        self._start: Dict[TermOrigin, float] = {}

    @staticmethod
    def gaps(state: GrowthState) -> Dict[TermOrigin, float]:
        return {o: float(1.0 - abs(t.sing)) for o, t in zip(state.origins, state.map.terms)}

    def start(self, state: GrowthState) -> None:
        self._start = self.gaps(state)

    def update(self, state: GrowthState) -> List[SingularityViolation]:
        """Log the closest approach; at a window boundary return the violations."""
        gaps = self.gaps(state)
        if gaps:
            closest = min(gaps.values())
            if closest < 100 * self.cusp:
                logger.warning(f"Step {state.step}: singularity within {closest:.3e} "
                               f"of the unit circle")
            else:
                logger.debug(f"Step {state.step}: closest singularity gap {closest:.3e}")
        if state.step % self.window:
            return []
        violations = [
            SingularityViolation(
                step=state.step,
                kind=origin.kind,
                index=origin.index,
                origin_step=origin.step,
                gap_start=self._start[origin],
                gap_end=gap,
            )
            for origin, gap in gaps.items()
            if origin in self._start and gap > self._start[origin]
        ]
        for v in violations:
            logger.warning(f"Step {v.step}: {v.kind} term {v.index} moved away from the circle "
                           f"over {self.window} steps ({v.gap_start:.3e} -> {v.gap_end:.3e})")
        self._start = gaps
        return violations


def initial_state_from_config(config: "RunConfig") -> GrowthState:
    return initial_state(
        config.initial_radius,
        config.perturbation_pairs(),
        config.driver_points(),
        config.anchor_points(),
    )


def run_simulation(config: "RunConfig", path_index: int = 0) -> SimulationResult:
    """Run ``config.steps`` growth steps.

    Snapshots are kept for step 0, every ``snapshot_every`` steps and the last
    accepted step. A numerical abort ends the run; the result keeps everything
    produced so far together with the error record and the failing step's report.

    Args:
        config: Validated run configuration
        path_index: Noise stream index (ensembles use one per path)

    Returns:
        SimulationResult
    """
    params = config.rate_params()
    options = config.step_options()
    noise = config.noise(path_index)
    state = initial_state_from_config(config)
    result = SimulationResult(snapshots=[state])
    result.zeta_paths = [[z] for z in source_points(state.map, state.drivers.xis)]
    monitor = SingularityMonitor(config.tolerances.cusp)
    monitor.start(state)
    logger.info(f"Starting {config.mode} run: {config.steps} steps, N={config.n_drivers}, "
                f"kappa={config.kappa}, seed={config.seed}, path={path_index}")

    for _ in range(config.steps):
        try:
            state, report = grow_step(state, config.dt, noise, params, config.tolerances, options)
        except NumericalError as e:
            logger.error(f"Run aborted at step {state.step + 1}: {str(e)}")
            result.termination = ABORTED
            result.error = error_record(e, step=state.step + 1)
            result.failed_step = state.step + 1
            result.failed_report = e.report
            break
        violations = monitor.update(state)
        if violations:
            report = replace(report, singularity_violations=len(violations))
            result.singularity_violations.extend(violations)
        result.reports.append(report)
        for path, z in zip(result.zeta_paths, source_points(state.map, state.drivers.xis)):
            path.append(complex(z))
        if state.step % config.snapshot_every == 0:
            result.snapshots.append(state)

    if result.snapshots[-1] is not state:
        result.snapshots.append(state)
    logger.info(f"Run {result.termination} at t={state.t:.6g} after {state.step} steps "
                f"({state.n_terms} log terms)")
    return result
