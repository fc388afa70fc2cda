"""One growth step: drivers, new log terms, Newton re-solve, checks."""

import logging
from dataclasses import replace
from typing import List, Optional, Tuple

import numpy as np

from slg_lab.conformal.mapping import (
    ConformalMap,
    LogTerm,
    area_closed_form,
    area_quadrature,
    boundary_grid,
    eval_map,
    schwarz_residual,
    singularity_targets,
    with_parameters,
)
from slg_lab.constants import AREA_REL_TOL, STALLED_SOURCE_TOL
from slg_lab.drivers.noise import NoiseStream
from slg_lab.drivers.sde import RateParams, step_drivers, time_change
from slg_lab.errors import CuspDetected, NegativeDensity, NewtonDiverged, NumericalError
from slg_lab.growth.density import DETERMINISTIC, density
from slg_lab.growth.options import StepOptions, Tolerances
from slg_lab.growth.solver import ConservedSystem, solve_conserved
from slg_lab.growth.state import DRIVER, GrowthState, StepReport, TermOrigin

logger = logging.getLogger(__name__)


def source_points(cmap: ConformalMap, xis) -> np.ndarray:
    """Virtual sources zeta_n = z(1/conj(xi_n))."""
    xis = np.asarray(xis, dtype=complex)
    if xis.size == 0:
        return np.zeros(0, dtype=complex)
    z, _ = eval_map(cmap, 1.0 / np.conj(xis))
    return np.atleast_1d(z)


def grow_step(
    state: GrowthState,
    dt: float,
    noise: NoiseStream,
    params: RateParams,
    tolerances: Tolerances,
    options: StepOptions,
) -> Tuple[GrowthState, StepReport]:
    """Advance the growth state by one step, halving dt on recoverable failures.

    Args:
        state: Current state
        dt: Requested time step
        noise: Brownian source of this path
        params: Rate parameters
        tolerances: Solver and geometry bounds
        options: Mode, driver mode, grid and pruning options

    Returns:
        Tuple of the new state and its StepReport

    Raises:
        CuspDetected: If the step keeps failing after the allowed dt halvings
        NumericalError: Any other numerical abort from the drivers or the solver
    """
    last_error = None
    for halving in range(tolerances.max_dt_halvings + 1):
        trial_dt = dt / 2**halving
        try:
            return _attempt(state, trial_dt, noise, params, tolerances, options, halving)
        except (NewtonDiverged, NegativeDensity) as e:
            last_error = e
            logger.warning(f"Step {state.step + 1} failed at dt={trial_dt:.3e} ({str(e)})")
        except NumericalError as e:
            e.report = failed_report(state, trial_dt, halving, e)
            raise
    error = CuspDetected(
        f"Step {state.step + 1} failed after {tolerances.max_dt_halvings} dt halvings: "
        f"{last_error.message}",
        step=state.step + 1,
        cause=type(last_error).__name__,
    )
    error.report = failed_report(state, trial_dt, tolerances.max_dt_halvings, last_error)
    raise error


def failed_report(state: GrowthState, dt: float, halvings: int, error: NumericalError) -> StepReport:
    """Report of a step that was not accepted; quantities never computed are nan."""
    context = error.context
    return StepReport(
        step=state.step + 1,
        t=state.t + dt,
        dt_used=dt,
        newton_iters=int(context.get("iterations", 0)),
        max_residual=float(context.get("residual", np.nan)),
        min_density=float(context.get("value", np.nan)),
        area_closed_form=np.nan,
        area_quadrature=np.nan,
        radius=state.map.radius,
        n_terms=state.n_terms,
        halvings=halvings,
    )


def _attempt(
    state: GrowthState,
    dt: float,
    noise: NoiseStream,
    params: RateParams,
    tolerances: Tolerances,
    options: StepOptions,
    halvings: int,
) -> Tuple[GrowthState, StepReport]:
    old_map = state.map
    drivers = state.drivers
    new_terms: List[LogTerm] = []
    new_origins: List[TermOrigin] = []
    dzeta = state.dzeta_prev
    dqs = np.zeros(0)
    dW = 0.0
    coeffs_this_step: Tuple[complex, ...] = ()
    stochastic = options.mode != DETERMINISTIC and drivers.n > 0

    if stochastic:
        tc = options.time_change
        dqs = time_change(old_map, drivers.anchors, params.nu, dt, tc.mode, tc.alpha, tc.eps)
        dW = noise.increment(state.step, float(np.mean(dqs)))
        drivers = step_drivers(state.drivers, dqs, dW, params, options.kappa,
                               options.driver_mode, options.generalized, tolerances.clock_skew)
        nearest = max(abs(x) for x in drivers.xis)
        if nearest >= 1.0 - tolerances.cusp:
            raise CuspDetected(f"Driving point at |xi|={nearest:.12f} reached the cusp bound",
                               xi_abs=float(nearest))
        zeta_old = source_points(old_map, state.drivers.xis)
        zeta_new = source_points(old_map, drivers.xis)
        dzeta_list: List[Optional[complex]] = []
        coeffs = []
        for n in range(drivers.n):
            dz_n = complex(zeta_new[n] - zeta_old[n])
            if abs(dz_n) < STALLED_SOURCE_TOL:
                # a source at rest adds no term and restarts its increment chain
                logger.debug(f"Step {state.step + 1}: virtual source {n} at rest, no new term")
                coeffs.append(0j)
                dzeta_list.append(None)
                continue
            c = params.nu * dt / dz_n
            if state.dzeta_prev[n] is not None:
                c -= params.nu * dt / state.dzeta_prev[n]
            coeffs.append(c)
            dzeta_list.append(dz_n)
            new_terms.append(LogTerm(coeff=complex(np.conj(c)), sing=drivers.xis[n]))
            new_origins.append(TermOrigin(DRIVER, n, state.step + 1))
        dzeta = tuple(dzeta_list)
        coeffs_this_step = tuple(coeffs)

    t_new = state.t + dt
    cmap, result_iters, result_res = _solve(
        old_map, new_terms, np.array(state.targets, dtype=complex),
        state.area_target(params.bigQ, t_new), state.tau_target, tolerances,
    )
    targets = list(state.targets)
    if new_terms:
        fresh = singularity_targets(cmap, np.array([t.sing for t in new_terms]))
        targets.extend(complex(v) for v in fresh)
    origins = list(state.origins) + new_origins

    pruned = 0
    if options.prune is not None:
        cmap, targets, origins, pruned, extra_iters = prune_terms(
            cmap, targets, origins, state.tau_target,
            state.area_target(params.bigQ, t_new), options.prune.tau,
            options.prune.merge_distance, tolerances,
        )
        result_iters += extra_iters

    sings = cmap.sings
    if sings.size and np.max(np.abs(sings)) >= 1.0 - tolerances.cusp:
        raise CuspDetected(f"Singularity reached |a|={np.max(np.abs(sings)):.12f}",
                           sing_abs=float(np.max(np.abs(sings))))

    grid = boundary_grid(cmap, options.grid_m)
    min_dz = float(np.min(np.abs(grid.dz_vals)))
    if min_dz <= 1e-10 * cmap.radius:
        raise CuspDetected(f"Map derivative vanishes on the boundary (min |z'|={min_dz:.3e})",
                           min_dz=min_dz)
    rho = density(cmap, drivers, params, options.mode, grid)
    max_residual = float(np.max(np.abs(singularity_targets(cmap) - np.array(targets))))\
        if targets else 0.0
    a_closed = area_closed_form(cmap)
    a_quad = area_quadrature(grid)
    if abs(a_closed - a_quad) > AREA_REL_TOL * abs(a_quad):
        logger.warning(f"Step {state.step + 1}: closed-form area {a_closed:.12g} vs "
                       f"quadrature {a_quad:.12g}; grid may be under-resolved")
    if options.mode == DETERMINISTIC and cmap.radius < old_map.radius:
        logger.warning(f"Step {state.step + 1}: conformal radius decreased")

    new_state = replace(
        state,
        map=cmap,
        drivers=drivers,
        t=t_new,
        step=state.step + 1,
        targets=tuple(targets),
        origins=tuple(origins),
        dzeta_prev=dzeta,
        coeff_history=state.coeff_history + ((coeffs_this_step,) if stochastic else ()),
        pruned_total=state.pruned_total + pruned,
    )
    report = StepReport(
        step=new_state.step,
        t=t_new,
        dt_used=dt,
        newton_iters=result_iters,
        max_residual=max_residual,
        min_density=float(np.min(rho)),
        area_closed_form=a_closed,
        area_quadrature=a_quad,
        pruned_terms=pruned,
        radius=cmap.radius,
        circle_radius=new_state.circle_radius(params.bigQ),
        schwarz_residual=schwarz_residual(cmap, grid),
        min_dz=min_dz,
        n_terms=new_state.n_terms,
        halvings=halvings,
        dW=dW,
        dq=tuple(float(q) for q in dqs),
    )
    logger.debug(f"Step {report.step}: t={t_new:.6g} r={cmap.radius:.12g} "
                 f"iters={result_iters} residual={result_res:.2e} terms={report.n_terms}")
    return new_state, report


def _solve(
    old_map: ConformalMap,
    new_terms: List[LogTerm],
    targets: np.ndarray,
    area_target: float,
    tau_target: complex,
    tolerances: Tolerances,
    guess: Optional[ConformalMap] = None,
) -> Tuple[ConformalMap, int, float]:
    """Solve for r, b and the existing singularities with new terms held fixed."""
    start = guess or old_map
    coeffs = np.concatenate([old_map.coeffs, [t.coeff for t in new_terms]]).astype(complex)
    fixed = np.array([t.sing for t in new_terms], dtype=complex)
    ref_sings = np.concatenate([old_map.sings, fixed])
    ref_args = np.concatenate([
        np.angle(old_map.sings) + 2 * np.pi * np.array(old_map.branch_offsets, dtype=float),
        np.angle(fixed),
    ]) if ref_sings.size else np.zeros(0)
    system = ConservedSystem(
        coeffs=coeffs,
        fixed_sings=fixed,
        targets=targets,
        area_target=area_target,
        tau_target=tau_target,
        ref_args=ref_args,
        ref_sings=ref_sings,
    )
    r2 = max(area_target / area_closed_form(old_map), 0.0) * start.radius**2
    radius_guess = np.sqrt(r2) if guess is None else start.radius
    result = solve_conserved(
        system, radius_guess, start.center, start.sings,
        tolerances.newton, tolerances.newton_max_iter,
    )
    sings = np.concatenate([result.free_sings, fixed])
    cmap = with_parameters(old_map, result.radius, result.center, coeffs, sings)
    return cmap, result.iterations, result.residual


def prune_terms(
    cmap: ConformalMap,
    targets: List[complex],
    origins: List[TermOrigin],
    tau_target: complex,
    area_target: float,
    tau: float,
    merge_distance: float,
    tolerances: Tolerances,
):
    """Merge near-coincident singularities, drop |coeff| < tau, then re-solve.

    Returns:
        Tuple (map, targets, origins, number of removed terms, Newton iterations)
    """
    coeffs = list(cmap.coeffs)
    sings = list(cmap.sings)
    offsets = list(cmap.branch_offsets)
    keep = [True] * len(coeffs)
    for i in range(len(coeffs)):
        if not keep[i]:
            continue
        for j in range(i + 1, len(coeffs)):
            if keep[j] and abs(sings[i] - sings[j]) < merge_distance:
                coeffs[i] += coeffs[j]
                keep[j] = False
    for i in range(len(coeffs)):
        if keep[i] and abs(coeffs[i]) < tau:
            keep[i] = False
    removed = keep.count(False)
    if not removed:
        return cmap, targets, origins, 0, 0

    kept = [i for i in range(len(keep)) if keep[i]]
    reduced = ConformalMap(
        radius=cmap.radius,
        terms=tuple(LogTerm(complex(coeffs[i]), complex(sings[i])) for i in kept),
        branch_offsets=tuple(offsets[i] for i in kept),
        center=cmap.center,
    )
    new_targets = np.array([targets[i] for i in kept], dtype=complex)
    solved, iters, _ = _solve(reduced, [], new_targets, area_target, tau_target, tolerances,
                              guess=reduced)
    logger.info(f"Pruned {removed} log terms, {len(kept)} remain")
    return solved, list(new_targets), [origins[i] for i in kept], removed, iters


def lg_residual(state_t: GrowthState, state_next: GrowthState, bigQ: float, m: int) -> np.ndarray:
    """Residual Im[dz̄/dt * dz/dphi] - Q/2pi of the Laplacian growth equation.

    The time derivative is a forward difference between the two snapshots; dz/dphi is
    averaged over them so that the difference is centered.
    """
    dt = state_next.t - state_t.t
    if dt <= 0:
        raise ValueError("Snapshots must be in increasing time order")
    g0 = boundary_grid(state_t.map, m)
    g1 = boundary_grid(state_next.map, m)
    dzbar_dt = np.conj(g1.z_vals - g0.z_vals) / dt
    dz_dphi = 0.5 * (g0.dz_dphi + g1.dz_dphi)
    return np.imag(dzbar_dt * dz_dphi) - bigQ / (2 * np.pi)
