"""Command-line entry point: ``slg <simulate|deterministic|martingale-check|analyze>``."""

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional

from slg_lab.cli.analysis import analyze_fjords
from slg_lab.cli.config import RunConfig, load_config, with_overrides
from slg_lab.cli.export import export_snapshots, write_stats
from slg_lab.cli.manifest import RunManifest
from slg_lab.constants import (
    EXIT_CONFIG_ERROR,
    EXIT_NUMERICAL_ABORT,
    EXIT_OK,
    STATS_FILE,
)
from slg_lab.errors import ConfigError, NumericalError
from slg_lab.growth.simulation import run_simulation
from slg_lab.martingale.ensemble import COROLLARY, MEAN_M, ensemble_verify
from slg_lab.services.settings import LabSettings, get_settings
from slg_lab.utils.json_io import to_jsonable

logger = logging.getLogger(__name__)

SIMULATE = "simulate"
DETERMINISTIC = "deterministic"
MARTINGALE_CHECK = "martingale-check"
ANALYZE = "analyze"
DRIVER_MODES = ("conjugate_slice", "literal_double")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slg", description="Stochastic Laplacian growth simulator and martingale checks"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        (SIMULATE, "run one growth trajectory"),
        (DETERMINISTIC, "run with the noise switched off"),
        (MARTINGALE_CHECK, "Monte Carlo verification of the martingale identities"),
        (ANALYZE, "simulate, then measure fjords and harmonic-measure scaling"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--steps", type=int, default=None)
        p.add_argument("--paths", type=int, default=None, help="ensemble size override")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--timing", action="store_true", help="record wall-clock time")
    return parser


def configure_logging(settings: LabSettings) -> None:
    logging.basicConfig(level=settings.log_level, format=settings.log_format, force=True)


def _resolve_config(args: argparse.Namespace, settings: LabSettings) -> RunConfig:
    config = load_config(args.config)
    overrides = {"seed": args.seed, "steps": args.steps, "n_paths": args.paths}
    if args.workers is not None:
        overrides["workers"] = settings.worker_count(args.workers)
    elif settings.max_workers is not None:
        overrides["workers"] = settings.worker_count(config.workers)
    if args.command == DETERMINISTIC:
        overrides["mode"] = "deterministic"
    return with_overrides(config, **overrides)


def _simulate(config: RunConfig, manifest: RunManifest, out: Path, analyze: bool) -> int:
    result = run_simulation(config)
    manifest.record_simulation(result)
    export_snapshots(result.snapshots, out, config.grid_m)
    if not result.completed:
        return EXIT_NUMERICAL_ABORT
    if analyze:
        report = analyze_fjords(result.snapshots, result.zeta_paths)
        manifest.analysis = report.to_dict()
    return EXIT_OK


def _martingale_check(config: RunConfig, manifest: RunManifest, out: Path) -> int:
    stats_path = out / STATS_FILE
    if stats_path.exists():
        stats_path.unlink()
    for check in config.checks:
        modes = [config.driver_mode]
        if config.pair_driver_modes and check in (MEAN_M, COROLLARY):
            modes = list(DRIVER_MODES)
        for mode in modes:
            stats = ensemble_verify(with_overrides(config, driver_mode=mode), check)
            write_stats(stats.rows, out, mode)
            manifest.stats.append(to_jsonable({
                "check": check,
                "driver_mode": mode,
                "n_paths": stats.n_paths,
                "anchor": stats.anchor,
                "flow_gap": stats.flow_gap,
                "s_exits": stats.s_exits,
                "flow_failures": stats.flow_failures,
                "gaps": list(stats.gaps),
                "max_abs_z": stats.max_abs_z,
                "rows": [
                    {"identity": r.identity, "estimate": r.estimate, "stderr": r.stderr,
                     "z_score": r.z_score}
                    for r in stats.rows
                ],
            }))
    return EXIT_OK


def run_cli(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand and return its exit status.

    0 on success, 2 on a configuration error, 3 on a numerical abort. The manifest
    is written in every case where an output directory is known.
    """
    args = build_parser().parse_args(argv)
    settings = get_settings()
    configure_logging(settings)
    out = Path(args.out or settings.default_out_dir)
    manifest = RunManifest(command=args.command)
    started = time.perf_counter()

    try:
        config = _resolve_config(args, settings)
    except ConfigError as e:
        logger.error(f"Configuration error: {str(e)}")
        manifest.record_error(e.record())
        _write_manifest(manifest, out, args.timing, started)
        return EXIT_CONFIG_ERROR

    manifest.config = config.echo()
    logger.info(f"{args.command}: seed={config.seed} steps={config.steps} out={out}")
    try:
        if args.command == MARTINGALE_CHECK:
            status = _martingale_check(config, manifest, out)
        else:
            status = _simulate(config, manifest, out, analyze=args.command == ANALYZE)
    except ConfigError as e:
        logger.error(f"Configuration error: {str(e)}")
        manifest.record_error(e.record())
        status = EXIT_CONFIG_ERROR
    except NumericalError as e:
        logger.error(f"Numerical abort: {str(e)}")
        manifest.record_error(e.record())
        if e.report is not None:
            manifest.failed_report = to_jsonable(e.report.to_dict())
        status = EXIT_NUMERICAL_ABORT

    _write_manifest(manifest, out, args.timing, started)
    return status


def _write_manifest(manifest: RunManifest, out: Path, timing: bool, started: float) -> None:
    if timing:
        manifest.wall_clock = time.perf_counter() - started
    try:
        manifest.write(out)
    except OSError as e:
        logger.error(f"Could not write manifest to {out}: {str(e)}")


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
