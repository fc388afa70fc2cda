"""Tests for the exports, the manifest and the command-line exit codes."""

import numpy as np
import pytest

from slg_lab.cli.export import (
    export_map,
    export_snapshot,
    load_snapshot,
    read_contours,
    write_stats,
)
from slg_lab.cli.main import build_parser, run_cli
from slg_lab.constants import (
    CONTOURS_FILE,
    EXIT_CONFIG_ERROR,
    EXIT_NUMERICAL_ABORT,
    EXIT_OK,
    MANIFEST_FILE,
    MAP_PARAMS_FILE,
    MAP_PARAMS_HEADER,
    STATS_FILE,
    STATS_HEADER,
)
from slg_lab.conformal.mapping import ConformalMap, boundary_grid
from slg_lab.errors import NegativeDensity
from slg_lab.growth.engine import failed_report
from slg_lab.growth.state import initial_state
from slg_lab.martingale.ensemble import StatRow
from slg_lab.utils.json_io import load_json


@pytest.mark.unit
def test_identity_contour(tmp_path, identity_map):
    """Test that the identity map exports the unit circle, one row per node."""
    export_map(0, 0.0, identity_map, tmp_path, 64)
    table = read_contours(tmp_path)
    assert table.shape == (64, 5)
    np.testing.assert_allclose(np.hypot(table[:, 3], table[:, 4]), 1.0, atol=1e-15)
    np.testing.assert_allclose(table[:, 2], 2 * np.pi * np.arange(64) / 64)


@pytest.mark.unit
def test_export_reload_is_exact(tmp_path, perturbed_map):
    """Test that re-exporting a reloaded map reproduces the files byte for byte."""
    first, second = tmp_path / "a", tmp_path / "b"
    export_map(0, 0.0, ConformalMap.circle(1.0), first, 32)
    export_map(3, 0.03, perturbed_map, first, 32)
    maps = load_snapshot(first)
    assert [(step, t) for step, t, _ in maps] == [(0, 0.0), (3, 0.03)]
    assert maps[1][2] == perturbed_map
    for step, t, cmap in maps:
        export_map(step, t, cmap, second, 32)
    for name in (CONTOURS_FILE, MAP_PARAMS_FILE):
        assert (first / name).read_bytes() == (second / name).read_bytes()


@pytest.mark.unit
def test_export_snapshot_appends(tmp_path):
    """Test that snapshots append rows and the header is written once."""
    state = initial_state(1.0, [(0.05 + 0.02j, 0.5 + 0.1j)])
    grid = boundary_grid(state.map, 16)
    export_snapshot(state, grid, tmp_path)
    export_snapshot(state, grid, tmp_path)
    assert read_contours(tmp_path).shape == (32, 5)
    rows = (tmp_path / MAP_PARAMS_FILE).read_text(encoding="utf-8").splitlines()
    assert rows[0] == ",".join(MAP_PARAMS_HEADER)
    assert len(rows) == 1 + 2 * 3
    assert [m for _, _, m in load_snapshot(tmp_path)] == [state.map, state.map]


@pytest.mark.unit
def test_load_snapshot_rejects_bad_header(tmp_path):
    (tmp_path / MAP_PARAMS_FILE).write_text("a,b\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_snapshot(tmp_path)


@pytest.mark.unit
def test_write_stats(tmp_path):
    """Test the stats table layout with complex estimates."""
    rows = [StatRow(check="mean_M", identity="ratio@1", estimate=1 + 0.5j, stderr=0.1,
                    z_score=2.0)]
    write_stats(rows, tmp_path, "conjugate_slice")
    lines = (tmp_path / STATS_FILE).read_text(encoding="utf-8").splitlines()
    assert lines[0] == ",".join(STATS_HEADER)
    assert lines[1] == "mean_M,ratio@1,conjugate_slice,1,0.5,0.10000000000000001,2"


@pytest.mark.unit
def test_parser_requires_config():
    """Test that every subcommand needs --config."""
    parser = build_parser()
    args = parser.parse_args(["analyze", "--config", "run.json", "--paths", "10"])
    assert (args.command, args.paths, args.timing) == ("analyze", 10, False)
    with pytest.raises(SystemExit):
        parser.parse_args(["simulate"])


@pytest.mark.integration
def test_deterministic_run(tmp_path, config_file):
    """Test a completed deterministic run: exit code, manifest and exports."""
    out = tmp_path / "run"
    assert run_cli(["deterministic", "--config", str(config_file), "--out", str(out)]) == EXIT_OK
    manifest = load_json(str(out / MANIFEST_FILE))
    assert manifest["termination"] == "completed"
    assert manifest["config"]["mode"] == "deterministic"
    assert manifest["snapshots"] == [0, 2, 4, 5]
    assert manifest["wall_clock"] is None
    last = manifest["steps"][-1]
    assert last["radius"] == pytest.approx(last["circle_radius"], abs=1e-10)
    assert read_contours(out).shape == (4 * 64, 5)


@pytest.mark.integration
def test_runs_are_reproducible(tmp_path, config_file):
    """Test that two runs of the same config write identical files."""
    for name in ("one", "two"):
        run_cli(["simulate", "--config", str(config_file), "--out", str(tmp_path / name)])
    for name in (MANIFEST_FILE, CONTOURS_FILE, MAP_PARAMS_FILE):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()


@pytest.mark.integration
def test_timing_is_opt_in(tmp_path, config_file):
    out = tmp_path / "timed"
    run_cli(["simulate", "--config", str(config_file), "--out", str(out), "--timing"])
    assert load_json(str(out / MANIFEST_FILE))["wall_clock"] >= 0


@pytest.mark.unit
def test_missing_config_exit_code(tmp_path):
    """Test exit code 2 and the manifest for an unreadable config."""
    out = tmp_path / "bad"
    status = run_cli(["simulate", "--config", str(tmp_path / "none.json"), "--out", str(out)])
    assert status == EXIT_CONFIG_ERROR
    manifest = load_json(str(out / MANIFEST_FILE))
    assert manifest["termination"] == "aborted"
    assert manifest["error"]["error"] == "ConfigError"


@pytest.mark.unit
def test_invalid_override_exit_code(tmp_path, config_file):
    status = run_cli(["simulate", "--config", str(config_file), "--steps", "-3",
                      "--out", str(tmp_path / "neg")])
    assert status == EXIT_CONFIG_ERROR


@pytest.mark.unit
def test_numerical_abort_exit_code(mocker, tmp_path, config_file):
    """Test exit code 3 with the error recorded in the manifest."""
    mocker.patch("slg_lab.cli.main.run_simulation",
                 side_effect=NegativeDensity("density went negative", angle=1.0, value=-0.1))
    out = tmp_path / "abort"
    status = run_cli(["simulate", "--config", str(config_file), "--out", str(out)])
    assert status == EXIT_NUMERICAL_ABORT
    error = load_json(str(out / MANIFEST_FILE))["error"]
    assert error["error"] == "NegativeDensity"
    assert error["angle"] == 1.0


@pytest.mark.integration
def test_aborted_run_records_the_failed_step(mocker, tmp_path, config_file):
    """Test that the manifest of an aborted run carries the report of the failed step."""
    error = NegativeDensity("density went negative", angle=1.0, value=-0.1)
    error.report = failed_report(initial_state(1.0), 0.01, 2, error)
    mocker.patch("slg_lab.growth.simulation.grow_step", side_effect=error)
    out = tmp_path / "abort"
    status = run_cli(["simulate", "--config", str(config_file), "--out", str(out)])
    assert status == EXIT_NUMERICAL_ABORT
    manifest = load_json(str(out / MANIFEST_FILE))
    assert manifest["termination"] == "aborted"
    assert manifest["failed_report"]["step"] == 1
    assert manifest["failed_report"]["min_density"] == -0.1
    assert manifest["failed_report"]["halvings"] == 2


@pytest.mark.integration
def test_martingale_check_without_drivers(tmp_path, degenerate_check_config):
    """Test that the check writes stats for both driver modes."""
    config_path = tmp_path / "check.json"
    config_path.write_text(degenerate_check_config.model_dump_json(), encoding="utf-8")
    out = tmp_path / "check"
    assert run_cli(["martingale-check", "--config", str(config_path), "--out", str(out)]) == \
        EXIT_OK
    manifest = load_json(str(out / MANIFEST_FILE))
    assert [s["driver_mode"] for s in manifest["stats"]] == ["conjugate_slice", "literal_double"]
    lines = (out / STATS_FILE).read_text(encoding="utf-8").splitlines()
    assert lines[0] == ",".join(STATS_HEADER)
    assert len(lines) > 2
