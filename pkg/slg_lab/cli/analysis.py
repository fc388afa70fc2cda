"""Post-hoc geometry: fjord widths against pi|c| and harmonic-measure scaling at tips."""

import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from slg_lab.conformal.mapping import ConformalMap, boundary_grid, eval_map
from slg_lab.constants import FJORD_MIN_DEPTH_WIDTHS, FJORD_WALL_SAMPLES
from slg_lab.errors import NoFjordDetected
from slg_lab.growth.state import GrowthState
from slg_lab.utils.json_io import complex_pair, to_jsonable

logger = logging.getLogger(__name__)

_DIAMETER_SAMPLES = 512
_OFFSET_FLOOR = 1e-14


@dataclass(frozen=True)
class FjordMeasurement:
    term: int
    origin: str
    coeff: complex
    sing: complex
    predicted_width: float
    measured_width: float
    depth: float
    orientation: float
    tip: complex
    tip_exponent: float
    centerline_offset: Optional[float] = None

    @property
    def width_ratio(self) -> float:
        return self.measured_width / self.predicted_width

    def to_dict(self) -> Dict[str, Any]:
        record = asdict(self)
        record["coeff"] = complex_pair(self.coeff)
        record["sing"] = complex_pair(self.sing)
        record["tip"] = complex_pair(self.tip)
        record["width_ratio"] = self.width_ratio
        return to_jsonable(record)


@dataclass(frozen=True)
class FjordReport:
    step: int
    t: float
    diameter: float
    fjords: List[FjordMeasurement] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "step": self.step,
            "t": self.t,
            "diameter": self.diameter,
            "fjords": [f.to_dict() for f in self.fjords],
        }


def _boundary(cmap: ConformalMap, phis: np.ndarray) -> np.ndarray:
    return eval_map(cmap, np.exp(1j * phis))[0]


def wall_window(cmap: ConformalMap, k: int) -> Optional[Tuple[float, float]]:
    """Angular offsets over which the walls of term k are parallel, or None."""
    term = cmap.terms[k]
    low = 10.0 * (1.0 - abs(term.sing))
    high = 0.01 * np.pi * abs(term.coeff) / cmap.radius
    if not low < high:
        return None
    return low, high


def _walls(cmap: ConformalMap, k: int, samples: int) -> Tuple[np.ndarray, np.ndarray]:
    window = wall_window(cmap, k)
    if window is None:
        raise NoFjordDetected(f"Term {k} has no parallel-wall window", term=k)
    phi_a = float(np.angle(cmap.terms[k].sing))
    deltas = np.logspace(np.log10(window[0]), np.log10(window[1]), samples)
    return _boundary(cmap, phi_a + deltas), _boundary(cmap, phi_a - deltas)


def _nearest(points: np.ndarray, wall: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Distance from each point to the sampled wall and the index of the closest sample."""
    dist = np.abs(points[:, None] - wall[None, :])
    return np.min(dist, axis=1), np.argmin(dist, axis=1)


def measure_width(
    cmap: ConformalMap,
    k: int,
    samples: int = FJORD_WALL_SAMPLES,
    centerline: Optional[Sequence[complex]] = None,
) -> float:
    """Nearest approach of the two walls of term k, measured across the centerline.

    At each centerline point the width is the distance to the nearest point of one
    wall plus the distance to the nearest point of the other; the result is the
    median over the points inside the parallel window. Centerline points whose
    nearest wall sample is an end of the window lie outside the channel and are
    ignored. Without a usable centerline the midpoints of opposite wall samples
    are used.

    Raises:
        NoFjordDetected: If the term has no parallel-wall window
    """
    upper, lower = _walls(cmap, k, samples)
    points = np.zeros(0, dtype=complex)
    if centerline is not None:
        points = np.asarray(centerline, dtype=complex).ravel()
    if points.size:
        _, iu = _nearest(points, upper)
        _, il = _nearest(points, lower)
        inside = (iu > 0) & (iu < samples - 1) & (il > 0) & (il < samples - 1)
        points = points[inside]
    if not points.size:
        points = 0.5 * (upper + lower)
    du, _ = _nearest(points, upper)
    dl, _ = _nearest(points, lower)
    return float(np.median(du + dl))


def fjord_depth(cmap: ConformalMap, k: int) -> float:
    """Distance from the tip to the wall midpoint at the top of the parallel window."""
    window = wall_window(cmap, k)
    if window is None:
        return 0.0
    phi_a = float(np.angle(cmap.terms[k].sing))
    tip = _boundary(cmap, np.array([phi_a]))[0]
    walls = _boundary(cmap, np.array([phi_a + window[1], phi_a - window[1]]))
    return float(abs(tip - walls.mean()))


def harmonic_measure_exponent(
    cmap: ConformalMap,
    phi0: float,
    radii: Sequence[float],
    fit: bool = True,
) -> Tuple[float, np.ndarray]:
    """Scaling exponent of the harmonic measure of balls around the boundary point at phi0.

    p(r) is the arc dphi/2pi of the boundary inside |z - s| < r, with the crossing offsets
    interpolated on a logarithmic grid in the angular offset. The exponent is the
    least-squares slope of log p against log r.

    Returns:
        Tuple (exponent, p values); the exponent is nan when ``fit`` is False
    """
    radii = np.asarray(radii, dtype=float)
    offsets = np.logspace(np.log10(_OFFSET_FLOOR), np.log10(np.pi), 4000)
    s = _boundary(cmap, np.array([phi0]))[0]
    arcs = np.zeros_like(radii)
    for sign in (1.0, -1.0):
        dist = np.abs(_boundary(cmap, phi0 + sign * offsets) - s)
        # first exit from the ball along this side
        for i, r in enumerate(radii):
            outside = np.flatnonzero(dist >= r)
            if not outside.size:
                arcs[i] += np.pi
                continue
            j = int(outside[0])
            if j == 0:
                arcs[i] += offsets[0]
                continue
            lo, hi = np.log(offsets[j - 1]), np.log(offsets[j])
            frac = (r - dist[j - 1]) / (dist[j] - dist[j - 1])
            arcs[i] += float(np.exp(lo + frac * (hi - lo)))
    p = arcs / (2 * np.pi)
    if not fit:
        return float("nan"), p
    slope, _ = np.polyfit(np.log(radii), np.log(p), 1)
    return float(slope), p


def diameter(cmap: ConformalMap) -> float:
    z = boundary_grid(cmap, _DIAMETER_SAMPLES).z_vals
    return float(np.max(np.abs(z[:, None] - z[None, :])))


def analyze_fjords(
    snapshots: Sequence[GrowthState],
    zeta_paths: Optional[Sequence[Sequence[complex]]] = None,
    min_depth_widths: float = FJORD_MIN_DEPTH_WIDTHS,
) -> FjordReport:
    """Measure every fjord of the last snapshot.

    A log term counts as a fjord when its walls have a parallel window and the tip
    lies deeper than ``min_depth_widths`` predicted widths. The tip exponent is fitted
    over radii from 1% to 10% of the predicted width.

    Args:
        snapshots: Trajectory snapshots; the last one is analysed
        zeta_paths: Virtual-source trajectories for the centerline comparison
        min_depth_widths: Depth threshold in units of pi|c|

    Returns:
        FjordReport

    Raises:
        NoFjordDetected: If no log term qualifies
    """
    if not snapshots:
        raise ValueError("Need at least one snapshot")
    state = snapshots[-1]
    cmap = state.map
    centerline = _centerline_points(zeta_paths)
    fjords = []
    for k, (term, origin) in enumerate(zip(cmap.terms, state.origins)):
        if wall_window(cmap, k) is None:
            continue
        predicted = float(np.pi * abs(term.coeff))
        depth = fjord_depth(cmap, k)
        if depth <= min_depth_widths * predicted:
            logger.debug(f"Term {k}: depth {depth:.3g} below {min_depth_widths} widths")
            continue
        phi_a = float(np.angle(term.sing))
        radii = predicted * np.logspace(-2, -1, 8)
        exponent, _ = harmonic_measure_exponent(cmap, phi_a, radii)
        tip = complex(_boundary(cmap, np.array([phi_a]))[0])
        fjords.append(FjordMeasurement(
            term=k,
            origin=origin.kind,
            coeff=term.coeff,
            sing=term.sing,
            predicted_width=predicted,
            measured_width=measure_width(cmap, k, centerline=centerline),
            depth=depth,
            orientation=float(np.angle(term.coeff)),
            tip=tip,
            tip_exponent=exponent,
            centerline_offset=_centerline_offset(cmap, k, zeta_paths),
        ))
    if not fjords:
        raise NoFjordDetected("No log term has parallel-wall fjord geometry", step=state.step)
    logger.info(f"Found {len(fjords)} fjords at step {state.step}")
    return FjordReport(step=state.step, t=state.t, diameter=diameter(cmap), fjords=fjords)


def _centerline_points(zeta_paths) -> Optional[np.ndarray]:
    if not zeta_paths:
        return None
    points = np.concatenate([np.asarray(p, dtype=complex) for p in zeta_paths])
    return points if points.size else None


def _centerline_offset(cmap: ConformalMap, k: int, zeta_paths) -> Optional[float]:
    """Median distance from the wall midpoints to the nearest recorded virtual-source point."""
    points = _centerline_points(zeta_paths)
    if points is None:
        return None
    low, high = wall_window(cmap, k)
    phi_a = float(np.angle(cmap.terms[k].sing))
    deltas = np.logspace(np.log10(low), np.log10(high), FJORD_WALL_SAMPLES)
    mids = 0.5 * (_boundary(cmap, phi_a + deltas) + _boundary(cmap, phi_a - deltas))
    return float(np.median(np.min(np.abs(mids[:, None] - points[None, :]), axis=1)))
