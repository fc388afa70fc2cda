"""Delimited-text exports of contours, map parameters and check statistics."""

import csv
import logging
import os
from pathlib import Path
from typing import Iterable, List, Tuple, Union

import numpy as np

from slg_lab.conformal.mapping import BoundaryGrid, ConformalMap, LogTerm, boundary_grid
from slg_lab.constants import (
    CONTOUR_HEADER,
    CONTOURS_FILE,
    FLOAT_FORMAT,
    MAP_PARAMS_FILE,
    MAP_PARAMS_HEADER,
    STATS_FILE,
    STATS_HEADER,
)
from slg_lab.growth.state import GrowthState

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
RADIUS = "radius"
CENTER = "center"
TERM = "term"


def _fmt(x: float) -> str:
    return format(float(x), FLOAT_FORMAT)


def _open_table(path: Path, header: List[str]):
    """Open a CSV for appending; the header is written when the file is new."""
    new = not path.exists()
    f = open(path, "a", encoding="utf-8", newline="")
    writer = csv.writer(f, lineterminator="\n")
    if new:
        writer.writerow(header)
    return f, writer


def contour_rows(step: int, t: float, grid: BoundaryGrid) -> Iterable[List[str]]:
    for phi, z in zip(grid.phis, grid.z_vals):
        yield [str(step), _fmt(t), _fmt(phi), _fmt(z.real), _fmt(z.imag)]


def map_rows(step: int, t: float, cmap: ConformalMap) -> Iterable[List[str]]:
    head = [str(step), _fmt(t)]
    yield head + [RADIUS, _fmt(cmap.radius), _fmt(0.0), _fmt(0.0), _fmt(0.0), "0"]
    yield head + [CENTER, _fmt(cmap.center.real), _fmt(cmap.center.imag),
                  _fmt(0.0), _fmt(0.0), "0"]
    for term, branch in zip(cmap.terms, cmap.branch_offsets):
        yield head + [TERM, _fmt(term.coeff.real), _fmt(term.coeff.imag),
                      _fmt(term.sing.real), _fmt(term.sing.imag), str(branch)]


def export_map(step: int, t: float, cmap: ConformalMap, out: PathLike, m: int) -> None:
    """Append one map (contour on an m-node grid and parameters) to the run tables."""
    out = Path(out)
    os.makedirs(out, exist_ok=True)
    grid = boundary_grid(cmap, m)
    f, writer = _open_table(out / CONTOURS_FILE, CONTOUR_HEADER)
    with f:
        writer.writerows(contour_rows(step, t, grid))
    f, writer = _open_table(out / MAP_PARAMS_FILE, MAP_PARAMS_HEADER)
    with f:
        writer.writerows(map_rows(step, t, cmap))


def export_snapshot(state: GrowthState, grid: BoundaryGrid, out: PathLike) -> None:
    """Append a snapshot to contours.csv and map_params.csv in ``out``.

    Args:
        state: Snapshot to write
        grid: Boundary grid of ``state.map``; its size sets the contour row count
        out: Output directory (created if missing)

    Raises:
        OSError: If the files cannot be written
    """
    try:
        export_map(state.step, state.t, state.map, out, grid.m)
    except OSError as e:
        logger.error(f"Failed to export snapshot {state.step} to {out}: {str(e)}")
        raise
    logger.debug(f"Exported snapshot step={state.step} ({grid.m} contour rows)")


def export_snapshots(snapshots: List[GrowthState], out: PathLike, m: int) -> None:
    """Write every snapshot in order, replacing existing tables."""
    out = Path(out)
    for name in (CONTOURS_FILE, MAP_PARAMS_FILE):
        if (out / name).exists():
            (out / name).unlink()
    for state in snapshots:
        export_snapshot(state, boundary_grid(state.map, m), out)


def load_snapshot(out: PathLike) -> List[Tuple[int, float, ConformalMap]]:
    """Read map_params.csv back into (step, t, map) triples in file order.

    Raises:
        OSError: If the file cannot be read
        ValueError: If a row is malformed
    """
    path = Path(out) / MAP_PARAMS_FILE
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != MAP_PARAMS_HEADER:
            raise ValueError(f"Unexpected header in {path}: {header}")
        maps: List[Tuple[int, float, ConformalMap]] = []
        current = None
        for row in reader:
            step, t, kind = int(row[0]), float(row[1]), row[2]
            values = [float(v) for v in row[3:7]]
            if kind == RADIUS:
                if current is not None:
                    maps.append(_build(current))
                current = {"step": step, "t": t, "radius": values[0], "center": 0j,
                           "terms": [], "branches": []}
            elif current is None:
                raise ValueError(f"{path}: '{kind}' row before any radius row")
            elif kind == CENTER:
                current["center"] = complex(values[0], values[1])
            elif kind == TERM:
                current["terms"].append(LogTerm(complex(values[0], values[1]),
                                                complex(values[2], values[3])))
                current["branches"].append(int(row[7]))
            else:
                raise ValueError(f"{path}: unknown row kind '{kind}'")
        if current is not None:
            maps.append(_build(current))
    return maps


def _build(entry: dict) -> Tuple[int, float, ConformalMap]:
    cmap = ConformalMap(radius=entry["radius"], terms=tuple(entry["terms"]),
                        branch_offsets=tuple(entry["branches"]), center=entry["center"])
    return entry["step"], entry["t"], cmap


def write_stats(rows: Iterable, out: PathLike, driver_mode: str = "") -> None:
    """Append statistic rows (objects with check, identity, estimate, stderr, z_score)."""
    out = Path(out)
    os.makedirs(out, exist_ok=True)
    f, writer = _open_table(out / STATS_FILE, STATS_HEADER)
    with f:
        for r in rows:
            estimate = complex(r.estimate)
            writer.writerow([r.check, r.identity, driver_mode, _fmt(estimate.real),
                             _fmt(estimate.imag), _fmt(r.stderr), _fmt(r.z_score)])


def read_contours(out: PathLike) -> np.ndarray:
    """Contour table as a float array with the CONTOUR_HEADER columns."""
    return np.loadtxt(Path(out) / CONTOURS_FILE, delimiter=",", skiprows=1, ndmin=2)
