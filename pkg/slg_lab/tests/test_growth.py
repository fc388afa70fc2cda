"""Tests for the growth density, the step engine and trajectory runs."""

import dataclasses

import numpy as np
import pytest

from slg_lab.cli.config import RunConfig
from slg_lab.conformal.mapping import ConformalMap, LogTerm, boundary_grid, eval_map
from slg_lab.conformal.potential import green_function, hadamard_rate
from slg_lab.drivers.noise import NoiseStream
from slg_lab.drivers.sde import RateParams, initial_driver_state
from slg_lab.errors import CuspDetected, NegativeDensity, NewtonDiverged, NumericalError
from slg_lab.growth.density import DETERMINISTIC, STOCHASTIC, density, density_bracket, flux
from slg_lab.growth.engine import (
    failed_report,
    grow_step,
    lg_residual,
    prune_terms,
    source_points,
)
from slg_lab.growth.options import PruneConfig, StepOptions, Tolerances
from slg_lab.growth.simulation import ABORTED, COMPLETED, SingularityMonitor, run_simulation
from slg_lab.growth.state import DRIVER, PERTURBATION, initial_state


@pytest.mark.unit
def test_deterministic_density_flux(perturbed_map, rate_params, no_drivers):
    """Test that the deterministic density carries total flux Q."""
    grid = boundary_grid(perturbed_map, 256)
    rho = density(perturbed_map, no_drivers, rate_params, DETERMINISTIC, grid)
    assert flux(rho, grid) == pytest.approx(rate_params.bigQ, rel=1e-12)


@pytest.mark.unit
def test_stochastic_density_flux(perturbed_map):
    """Test that the driver terms do not change the total flux."""
    params = RateParams(bigQ=1.0, nu=0.04, alphas=(1.0, 0.5))
    drivers = initial_driver_state(perturbed_map, [0.3 + 0.1j, -0.2 - 0.3j])
    grid = boundary_grid(perturbed_map, 512)
    rho = density(perturbed_map, drivers, params, STOCHASTIC, grid)
    assert flux(rho, grid) == pytest.approx(params.bigQ, rel=1e-10)


@pytest.mark.unit
def test_stochastic_without_drivers_is_deterministic(perturbed_map, rate_params, no_drivers):
    """Test that N = 0 reduces the stochastic density to the deterministic one."""
    grid = boundary_grid(perturbed_map, 128)
    np.testing.assert_allclose(
        density(perturbed_map, no_drivers, rate_params, STOCHASTIC, grid),
        density(perturbed_map, no_drivers, rate_params, DETERMINISTIC, grid),
        rtol=1e-13,
    )


@pytest.mark.unit
def test_bracket_with_central_driver(identity_map, one_driver_params):
    """Test that a driver at the origin gives a constant bracket sigma - alpha/2."""
    drivers = initial_driver_state(identity_map, [0j], anchors=[2.0 + 0j])
    grid = boundary_grid(identity_map, 64)
    bracket = density_bracket(grid.nodes, drivers, one_driver_params)
    np.testing.assert_allclose(bracket, one_driver_params.sigma - 0.5, rtol=1e-14)


@pytest.mark.unit
def test_negative_density(identity_map):
    """Test that a strong driver near the circle makes the density negative."""
    params = RateParams(bigQ=1.0, nu=0.04, alphas=(100.0,))
    drivers = initial_driver_state(identity_map, [0.9 + 0j])
    grid = boundary_grid(identity_map, 64)
    with pytest.raises(NegativeDensity) as info:
        density(identity_map, drivers, params, STOCHASTIC, grid)
    assert info.value.context["angle"] == pytest.approx(0.0)
    assert density(identity_map, drivers, params, STOCHASTIC, grid, check=False).min() < 0


@pytest.mark.unit
def test_source_points(perturbed_map):
    """Test the virtual sources z(1/conj(xi))."""
    assert source_points(perturbed_map, []).size == 0
    zeta = source_points(ConformalMap.circle(2.0), [0.5 + 0j])
    assert zeta[0] == pytest.approx(4.0)


@pytest.mark.integration
def test_deterministic_circle_radius(rate_params):
    """Test that a growing circle follows r = sqrt(r0^2 + Q t/pi)."""
    state = initial_state(1.0)
    options = StepOptions(mode="deterministic", grid_m=64)
    noise = NoiseStream(seed=0)
    for _ in range(10):
        state, report = grow_step(state, 0.01, noise, rate_params, Tolerances(), options)
        assert report.radius == pytest.approx(report.circle_radius, abs=1e-10)
    assert state.map.radius == pytest.approx(np.sqrt(1 + 0.1 / np.pi), abs=1e-10)
    assert state.step == 10
    assert state.t == pytest.approx(0.1)


@pytest.mark.integration
def test_circle_with_unit_area_rate():
    """Test r(t) = sqrt(1 + 2t) for Q = 2 pi over 100 steps."""
    config = RunConfig(mode="deterministic", bigQ=2 * np.pi, steps=100, dt=1e-2,
                       snapshot_every=100, grid_m=64)
    result = run_simulation(config)
    assert result.completed
    for report in result.reports:
        assert report.radius == pytest.approx(np.sqrt(1 + 2 * report.t), rel=1e-8)
    assert result.final_state.map.radius == pytest.approx(np.sqrt(3.0), rel=1e-8)


@pytest.mark.integration
def test_deterministic_perturbed_step_conserves_targets(rate_params):
    """Test the conserved targets and the area after deterministic steps."""
    state = initial_state(1.0, [(0.05 + 0.02j, 0.5 + 0.1j)])
    options = StepOptions(mode="deterministic", grid_m=256)
    noise = NoiseStream(seed=0)
    for _ in range(5):
        state, report = grow_step(state, 1e-3, noise, rate_params, Tolerances(), options)
        assert report.max_residual < 1e-10
        assert report.area_closed_form == pytest.approx(state.area_target(1.0), rel=1e-10)
    assert state.origins[0].kind == PERTURBATION


@pytest.mark.integration
def test_lg_residual_circle(rate_params):
    """Test that the circular solution satisfies the growth equation."""
    options = StepOptions(mode="deterministic", grid_m=64)
    start = initial_state(1.0)
    nxt, _ = grow_step(start, 1e-4, NoiseStream(seed=0), rate_params, Tolerances(), options)
    assert np.max(np.abs(lg_residual(start, nxt, 1.0, 64))) < 1e-6
    with pytest.raises(ValueError):
        lg_residual(nxt, start, 1.0, 64)


@pytest.mark.integration
def test_lg_residual_perturbed(rate_params):
    """Test the growth equation on a perturbed circle."""
    options = StepOptions(mode="deterministic", grid_m=256)
    start = initial_state(1.0, [(0.05 + 0.02j, 0.5 + 0.1j)])
    nxt, _ = grow_step(start, 1e-4, NoiseStream(seed=0), rate_params, Tolerances(), options)
    assert np.max(np.abs(lg_residual(start, nxt, 1.0, 256))) < 1e-4


@pytest.mark.integration
def test_stochastic_step_appends_driver_terms():
    """Test that a stochastic step adds one log term per driver."""
    params = RateParams(bigQ=1.0, nu=0.04, alphas=(1.0,))
    state = initial_state(1.0, xis=[0.5 + 0j])
    options = StepOptions(mode="stochastic", kappa=6.0, grid_m=256)
    new, report = grow_step(state, 1e-3, NoiseStream(seed=5, kappa=6.0), params,
                            Tolerances(), options)
    assert new.n_terms == 1
    assert new.origins[0].kind == DRIVER
    assert new.origins[0].step == 1
    assert len(new.coeff_history) == 1
    assert len(report.dq) == 1
    assert report.max_residual < 1e-10


@pytest.mark.integration
def test_driver_at_cusp_never_steps_silently():
    """Test that a driver at the unit circle aborts the step."""
    params = RateParams(bigQ=1.0, nu=0.04, alphas=(1.0,))
    state = initial_state(1.0, xis=[1 - 1e-9 + 0j])
    options = StepOptions(mode="stochastic", kappa=6.0, grid_m=256)
    with pytest.raises(NumericalError):
        grow_step(state, 1e-3, NoiseStream(seed=5, kappa=6.0), params, Tolerances(), options)


@pytest.mark.unit
def test_prune_merges_and_drops_terms(rate_params):
    """Test that pruning merges coincident singularities and drops tiny terms."""
    state = initial_state(1.0, [(0.03, 0.4 + 0j), (0.02, 0.4 + 1e-13j), (1e-9, -0.3 + 0j)])
    cmap, targets, origins, removed, _ = prune_terms(
        state.map, list(state.targets), list(state.origins), state.tau_target,
        state.area0, tau=1e-6, merge_distance=1e-10, tolerances=Tolerances(),
    )
    assert removed == 2
    assert len(cmap.terms) == len(targets) == len(origins) == 1
    assert cmap.terms[0].coeff == pytest.approx(0.05)


@pytest.mark.integration
def test_run_simulation_snapshots(circle_config):
    """Test snapshot bookkeeping of a completed run."""
    result = run_simulation(circle_config)
    assert result.termination == COMPLETED
    assert result.completed
    assert [s.step for s in result.snapshots] == [0, 2, 4, 5]
    assert len(result.reports) == 5
    assert result.final_state.step == 5


@pytest.mark.integration
def test_run_simulation_keeps_partial_output(mocker, circle_config):
    """Test that an abort keeps the steps already taken and records the error."""
    from slg_lab.growth import simulation

    real_step = simulation.grow_step
    calls = {"n": 0}

    def flaky(state, *args):
        calls["n"] += 1
        if calls["n"] == 3:
            raise NegativeDensity("density went negative", angle=0.5, value=-1e-3)
        return real_step(state, *args)

    mocker.patch("slg_lab.growth.simulation.grow_step", side_effect=flaky)
    result = run_simulation(circle_config)
    assert result.termination == ABORTED
    assert result.failed_step == 3
    assert result.error["error"] == "NegativeDensity"
    assert result.error["angle"] == 0.5
    assert len(result.reports) == 2
    assert result.final_state.step == 2


@pytest.mark.unit
def test_step_report_to_dict():
    """Test that reports serialize their auxiliary-time increments as a list."""
    from slg_lab.growth.state import StepReport

    report = StepReport(step=1, t=0.1, dt_used=0.1, newton_iters=2, max_residual=0.0,
                        min_density=0.1, area_closed_form=3.0, area_quadrature=3.0,
                        dq=(1e-3, 2e-3))
    record = report.to_dict()
    assert record["dq"] == [1e-3, 2e-3]
    assert dataclasses.is_dataclass(report)


@pytest.mark.unit
def test_run_config_drives_simulation_inputs():
    """Test that the config builds rates and options consistently."""
    config = RunConfig(n_drivers=2, alphas=[1.0, 2.0], kappa=4.0, grid_m=128)
    assert config.rate_params().alphas == (1.0, 2.0)
    assert config.step_options().grid_m == 128
    assert len(config.driver_points()) == 2
    assert abs(config.driver_points()[0]) == pytest.approx(0.5)


@pytest.mark.integration
def test_source_at_rest_adds_no_term(mocker):
    """Test that a virtual source that did not move leaves the map without a new term."""
    mocker.patch("slg_lab.growth.engine.step_drivers",
                 side_effect=lambda drivers, *args, **kwargs: drivers)
    params = RateParams(bigQ=1.0, nu=0.04, alphas=(1.0,))
    state = initial_state(1.0, xis=[0.5 + 0j])
    options = StepOptions(mode="stochastic", kappa=6.0, grid_m=256)
    new, report = grow_step(state, 1e-3, NoiseStream(seed=5, kappa=6.0), params,
                            Tolerances(), options)
    assert new.n_terms == 0
    assert new.coeff_history == ((0j,),)
    assert new.dzeta_prev == (None,)
    assert report.max_residual < 1e-10


@pytest.mark.unit
def test_failed_step_carries_its_report(mocker, rate_params):
    """Test that exhausting the dt halvings attaches the last attempt's report."""
    mocker.patch("slg_lab.growth.engine._attempt",
                 side_effect=NewtonDiverged("no convergence", residual=1e-3, iterations=50))
    state = initial_state(1.0)
    tolerances = Tolerances()
    with pytest.raises(CuspDetected) as info:
        grow_step(state, 1e-2, NoiseStream(seed=0), rate_params, tolerances,
                  StepOptions(mode="deterministic", grid_m=64))
    report = info.value.report
    assert report.step == 1
    assert report.dt_used == pytest.approx(1e-2 / 2**tolerances.max_dt_halvings)
    assert report.halvings == tolerances.max_dt_halvings
    assert report.max_residual == 1e-3
    assert report.newton_iters == 50
    assert np.isnan(report.area_closed_form)


@pytest.mark.integration
def test_aborted_run_keeps_the_failed_report(mocker, circle_config):
    """Test that the simulation result exposes the report of the step that failed."""
    error = NegativeDensity("density went negative", angle=0.5, value=-1e-3)
    error.report = failed_report(initial_state(1.0), 0.01, 0, error)
    mocker.patch("slg_lab.growth.simulation.grow_step", side_effect=error)
    result = run_simulation(circle_config)
    assert result.termination == ABORTED
    assert result.failed_report is error.report
    assert result.failed_report.min_density == -1e-3


@pytest.mark.integration
def test_hadamard_rate_matches_green_function_difference(rate_params, no_drivers):
    """Test the Hadamard rate against a finite difference of G over one growth step."""
    options = StepOptions(mode="deterministic", grid_m=256)
    state = initial_state(1.0, [(0.05 + 0.02j, 0.5 + 0.1j)])
    z1, _ = eval_map(state.map, 1.7 * np.exp(0.4j))
    z2, _ = eval_map(state.map, 2.3 * np.exp(-1.1j))
    rho = density(state.map, no_drivers, rate_params, DETERMINISTIC,
                  boundary_grid(state.map, 256))
    dt = 1e-5
    new, _ = grow_step(state, dt, NoiseStream(seed=0), rate_params, Tolerances(), options)
    difference = (green_function(new.map, z1, z2) - green_function(state.map, z1, z2)) / dt
    rate = hadamard_rate(state.map, rho, z1, z2)
    assert rate > 0
    assert difference == pytest.approx(rate, rel=1e-3)


@pytest.mark.integration
def test_fifty_deterministic_steps_conserve_targets(rate_params):
    """Test that the conserved quantities hold over a longer deterministic run."""
    state = initial_state(1.0, [(0.05 + 0.02j, 0.5 + 0.1j), (-0.03, -0.4 + 0.2j)])
    options = StepOptions(mode="deterministic", grid_m=256)
    noise = NoiseStream(seed=0)
    targets = state.targets
    for _ in range(50):
        state, report = grow_step(state, 1e-3, noise, rate_params, Tolerances(), options)
        assert report.max_residual < 1e-10
    assert state.targets == targets
    assert report.area_closed_form == pytest.approx(state.area_target(1.0), rel=1e-10)
    assert report.area_quadrature == pytest.approx(report.area_closed_form, rel=1e-8)


@pytest.mark.integration
def test_pruning_without_candidates_is_neutral(rate_params):
    """Test that pruning with nothing to merge or drop leaves the step unchanged."""
    state = initial_state(1.0, [(0.05 + 0.02j, 0.5 + 0.1j)])
    plain = StepOptions(mode="deterministic", grid_m=256)
    pruned = StepOptions(mode="deterministic", grid_m=256,
                         prune=PruneConfig(tau=0.0, merge_distance=0.0))
    a, _ = grow_step(state, 1e-3, NoiseStream(seed=0), rate_params, Tolerances(), plain)
    b, report = grow_step(state, 1e-3, NoiseStream(seed=0), rate_params, Tolerances(), pruned)
    assert a.map == b.map
    assert report.pruned_terms == 0


def _with_sing(state, sing: complex):
    term = state.map.terms[0]
    return dataclasses.replace(
        state, map=ConformalMap(radius=state.map.radius, terms=(LogTerm(term.coeff, sing),)),
    )


@pytest.mark.unit
def test_singularity_monitor_flags_terms_moving_away():
    """Test the windowed check that singularities approach the unit circle."""
    state = initial_state(1.0, [(0.05, 0.5)])
    monitor = SingularityMonitor(1e-9)
    monitor.start(state)
    assert monitor.update(dataclasses.replace(_with_sing(state, 0.4), step=10)) == []
    violations = monitor.update(dataclasses.replace(_with_sing(state, 0.4), step=20))
    assert len(violations) == 1
    assert violations[0].kind == PERTURBATION
    assert violations[0].gap_start == pytest.approx(1 - abs(state.map.terms[0].sing))
    assert violations[0].gap_end == pytest.approx(0.6)
    assert monitor.update(dataclasses.replace(_with_sing(state, 0.6), step=40)) == []
    with pytest.raises(ValueError):
        SingularityMonitor(1e-9, window=0)
