"""Growth engine: density, per-step map advance and whole-run orchestration."""

from slg_lab.growth.density import DETERMINISTIC, STOCHASTIC, density, density_bracket, flux
from slg_lab.growth.engine import grow_step, lg_residual, prune_terms, source_points
from slg_lab.growth.options import PruneConfig, StepOptions, TimeChangeConfig, Tolerances
from slg_lab.growth.simulation import SimulationResult, initial_state_from_config, run_simulation
from slg_lab.growth.solver import ConservedSystem, SolveResult, solve_conserved
from slg_lab.growth.state import GrowthState, StepReport, TermOrigin, initial_state

__all__ = [
    "ConservedSystem",
    "DETERMINISTIC",
    "GrowthState",
    "PruneConfig",
    "STOCHASTIC",
    "SimulationResult",
    "SolveResult",
    "StepOptions",
    "StepReport",
    "TermOrigin",
    "TimeChangeConfig",
    "Tolerances",
    "density",
    "density_bracket",
    "flux",
    "grow_step",
    "initial_state",
    "initial_state_from_config",
    "lg_residual",
    "prune_terms",
    "run_simulation",
    "solve_conserved",
    "source_points",
]
