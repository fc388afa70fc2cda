"""Run manifest: config echo, per-step summaries, conserved targets and termination."""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field

from slg_lab import __version__
from slg_lab.constants import MANIFEST_FILE
from slg_lab.growth.simulation import SimulationResult
from slg_lab.growth.state import GrowthState
from slg_lab.utils.json_io import complex_pair, save_json, to_jsonable

logger = logging.getLogger(__name__)

CONVENTIONS = {
    "map": "z(w) = r w + b + sum c log(1 - a/w)",
    "source_increment": "both endpoints of delta zeta use the pre-solve map of the step",
    "translation_target": "held fixed when new terms are appended",
    "anchors": "fixed at initialization, never updated",
    "stalled_source": "a virtual source at rest adds no log term that step",
    "hadamard_sign": "Dirichlet convention: boundary rate is ReK * density",
}


class RunManifest(BaseModel):
    """Everything needed to audit a run; written even when the run aborts."""

    model_config = ConfigDict(extra="forbid")

    command: str
    code_version: str = __version__
    config: Dict[str, Any] = Field(default_factory=dict)
    termination: str = "completed"
    error: Optional[Dict[str, Any]] = None
    failed_step: Optional[int] = None
    failed_report: Optional[Dict[str, Any]] = None
    singularity_violations: List[Dict[str, Any]] = Field(default_factory=list)
    steps: List[Dict[str, Any]] = Field(default_factory=list)
    conserved_targets: List[Dict[str, Any]] = Field(default_factory=list)
    snapshots: List[int] = Field(default_factory=list)
    stats: List[Dict[str, Any]] = Field(default_factory=list)
    analysis: Dict[str, Any] = Field(default_factory=dict)
    conventions: Dict[str, str] = Field(default_factory=lambda: dict(CONVENTIONS))
    wall_clock: Optional[float] = None

    def record_simulation(self, result: SimulationResult) -> None:
        self.termination = result.termination
        self.error = to_jsonable(result.error) if result.error else None
        self.failed_step = result.failed_step
        if result.failed_report is not None:
            self.failed_report = to_jsonable(result.failed_report.to_dict())
        self.singularity_violations = [v.to_dict() for v in result.singularity_violations]
        self.steps = [to_jsonable(r.to_dict()) for r in result.reports]
        self.snapshots = [s.step for s in result.snapshots]
        self.conserved_targets = target_table(result.final_state)

    def record_error(self, record: Dict[str, Any], termination: str = "aborted") -> None:
        self.termination = termination
        self.error = to_jsonable(record)

    def write(self, out: Union[str, Path]) -> Path:
        path = Path(out) / MANIFEST_FILE
        save_json(self.model_dump(mode="json"), str(path))
        logger.info(f"Manifest written to {path}")
        return path


def target_table(state: GrowthState) -> List[Dict[str, Any]]:
    """Conserved targets of every log term with its origin."""
    rows = []
    for target, origin, term in zip(state.targets, state.origins, state.map.terms):
        rows.append({
            "kind": origin.kind,
            "index": origin.index,
            "step": origin.step,
            "target": complex_pair(target),
            "coeff": complex_pair(term.coeff),
            "sing": complex_pair(term.sing),
        })
    return rows
