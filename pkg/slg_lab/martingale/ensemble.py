"""Monte Carlo checks of the martingale, covariance and pressure-variance identities."""

import logging
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, List, Optional, Sequence, Tuple

import numpy as np

from slg_lab.conformal.mapping import boundary_grid, eval_map
from slg_lab.drivers.sde import drift_g
from slg_lab.errors import ConfigError, NoConvergence, NoSPoint
from slg_lab.growth.density import density
from slg_lab.growth.engine import grow_step, source_points
from slg_lab.growth.simulation import initial_state_from_config
from slg_lab.growth.state import GrowthState
from slg_lab.martingale.double import (
    DoublePoint,
    DriverSet,
    anchor_dq,
    driver_set,
    evolve_double,
    find_S_points,
    h_logs,
    in_S,
    martingale_M,
    noise_kernel_sum,
    predicted_drift,
    rederived_w,
)
from slg_lab.martingale.pressure import elementary_deformation, pressure_variation

if TYPE_CHECKING:
    from slg_lab.cli.config import RunConfig

logger = logging.getLogger(__name__)

MEAN_M = "mean_M"
PROP2_COV = "prop2_cov"
COROLLARY = "corollary"
CHECKS = (MEAN_M, PROP2_COV, COROLLARY)


@dataclass(frozen=True)
class Summary:
    mean: complex
    stderr: float
    z_score: float
    n: int


def summarize(samples: Sequence[complex]) -> Summary:
    """Sample mean, standard error std(ddof=1)/sqrt(n) and |mean|/stderr.

    A zero standard error gives z = 0 for a zero mean and inf otherwise.
    """
    x = np.asarray(samples, dtype=complex)
    n = x.size
    if n == 0:
        raise ValueError("Cannot summarize an empty sample")
    mean = complex(np.mean(x))
    stderr = float(np.std(x, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    if stderr > 0:
        z = abs(mean) / stderr
    else:
        z = 0.0 if mean == 0 else float("inf")
    return Summary(mean=mean, stderr=stderr, z_score=float(z), n=n)


@dataclass(frozen=True)
class StatRow:
    check: str
    identity: str
    estimate: complex
    stderr: float
    z_score: float


@dataclass(frozen=True)
class EnsembleStats:
    """Rows of one check; the first row is the headline statistic.

    ``gaps[k]`` counts paths excluded from step k + 1 because the anchor had left the
    S-set earlier. ``flow_failures`` counts steps where the anchor could not be
    re-derived on the grown map.
    """

    check: str
    driver_mode: str
    n_paths: int
    rows: Tuple[StatRow, ...]
    anchor: complex
    flow_gap: float = 0.0
    s_exits: int = 0
    flow_failures: int = 0
    gaps: Tuple[int, ...] = ()

    @property
    def mean(self) -> complex:
        return self.rows[0].estimate

    @property
    def stderr(self) -> float:
        return self.rows[0].stderr

    @property
    def max_abs_z(self) -> float:
        return max(abs(r.z_score) for r in self.rows)


@dataclass(frozen=True)
class PathRecord:
    """Per-path quantities; increments are realized over one step each.

    ``exit_step`` is the first step after which the anchor was outside the S-set.
    """

    M: np.ndarray
    dM_nominal: np.ndarray
    dM_ito: np.ndarray
    dM_drift: np.ndarray
    pair_product: complex
    pair_nominal: complex
    pair_ito: complex
    square: complex
    square_nominal: complex
    square_ito: complex
    flow_gap: float
    s_exits: int
    flow_failures: int = 0
    exit_step: Optional[int] = None

    @property
    def dM_realized(self) -> np.ndarray:
        return np.diff(self.M)

    def valid_steps(self, n_steps: int) -> np.ndarray:
        """Steps whose starting point still had the anchor in the S-set."""
        valid = np.ones(n_steps, dtype=bool)
        if self.exit_step is not None:
            valid[self.exit_step:] = False
        return valid


def choose_anchor(state: GrowthState, m: int) -> complex:
    """First S-point of the state; with no drivers the boundary point at phi = 0.

    Raises:
        NoSPoint: If drivers exist but the S-set is empty
    """
    grid = boundary_grid(state.map, m)
    if state.drivers.n == 0:
        return complex(grid.z_vals[0])
    points = find_S_points(state.map, grid)
    if not points:
        raise NoSPoint("No boundary point satisfies the S-set conditions", step=state.step)
    return points[0]


def _check_config(config: "RunConfig", check: str) -> "RunConfig":
    if check not in CHECKS:
        raise ConfigError(f"Unknown check: {check}", check=check)
    if config.mode != "stochastic":
        raise ConfigError("Martingale checks need stochastic mode", check=check)
    if config.kappa <= 0:
        raise ConfigError("Martingale checks need kappa > 0", check=check)
    if check == PROP2_COV and config.n_drivers == 1:
        raise ConfigError("prop2_cov needs at least two drivers", check=check)
    if check == COROLLARY and config.n_drivers > 0:
        return config.model_copy(update={"generalized_drivers": True})
    return config


def run_path(config: "RunConfig", path_index: int, anchor: complex) -> PathRecord:
    """Evolve one path for ``check_steps`` steps, tracking M at the anchor.

    M follows the double-point flow. Each step the anchor's preimage is also re-derived
    on the grown map: that preimage decides S-set membership and its distance to the
    flow is reported as ``flow_gap``. When it cannot be re-derived the flow stands in
    and the step counts as a flow failure.
    """
    params = config.rate_params()
    options = config.step_options()
    noise = config.noise(path_index)
    kappa = config.kappa
    generalized = config.generalized_drivers
    state = initial_state_from_config(config)

    dset = driver_set(state.drivers, params, generalized)
    dp = DoublePoint.from_anchor(state.map, anchor, dset.size)
    ref = h_logs(dp, dset) if dset.size else None
    first = martingale_M(dp, dset, kappa, anchor=anchor, reference=ref)
    Ms = [first.M]
    nominal = []
    ito = []
    drift = []
    pair = (0j, 0j, 0j)
    square = (0j, 0j, 0j)
    flow_gap = 0.0
    flow_failures = 0
    s_exits = 0
    exit_step = None

    for k in range(config.check_steps):
        grid = boundary_grid(state.map, config.grid_m)
        rho = density(state.map, state.drivers, params, options.mode, grid)
        dset = driver_set(state.drivers, params, generalized)
        new_state, report = grow_step(state, config.dt, noise, params, config.tolerances, options)
        dq_noise = float(np.mean(report.dq)) if report.dq else 0.0
        dq_anchor = anchor_dq(state.map, dp.w, params.nu, report.dt_used)
        before = martingale_M(dp, dset, kappa, report.dW, anchor=anchor, reference=ref)
        nominal.append(before.dM)
        ito.append(before.dM_ito)
        drift.append(_drift_term(state, dp, dset, before.M, config, params, dq_anchor, report.dq))
        if k == 0:
            pair_before = _pair_terms(state, dp, dset, kappa, anchor, ref, config.grid_m)
            square_before = _square_terms(state, params, dp, dset, kappa, anchor, before.M)

        dp = evolve_double(dp, rho, report.dt_used, dset=dset, dq=dq_anchor)
        state = new_state
        dset_after = driver_set(state.drivers, params, generalized)
        ref = h_logs(dp, dset_after, ref) if dset_after.size else None
        after = martingale_M(dp, dset_after, kappa, anchor=anchor, reference=ref)
        Ms.append(after.M)

        if k == 0:
            pair = _pair_realized(pair_before, dp, dset_after, kappa, anchor, ref,
                                  params.nu, dq_noise)
            square = (
                (after.M - before.M) ** 2,
                square_before[0] * dq_noise,
                square_before[1] * dq_noise,
            )
        try:
            w_now = rederived_w(state.map, anchor, dp.w)
            flow_gap = max(flow_gap, abs(dp.w - w_now))
        except NoConvergence as e:
            logger.debug(f"Path {path_index} step {k + 1}: anchor not re-derived ({e})")
            w_now = dp.w
            flow_failures += 1
        if dset_after.size and not in_S(state.map, w_now):
            s_exits += 1
            if exit_step is None:
                exit_step = k + 1

    return PathRecord(
        M=np.array(Ms, dtype=complex),
        dM_nominal=np.array(nominal, dtype=complex),
        dM_ito=np.array(ito, dtype=complex),
        dM_drift=np.array(drift, dtype=complex),
        pair_product=pair[0],
        pair_nominal=pair[1],
        pair_ito=pair[2],
        square=square[0],
        square_nominal=square[1],
        square_ito=square[2],
        flow_gap=float(flow_gap),
        s_exits=s_exits,
        flow_failures=flow_failures,
        exit_step=exit_step,
    )


def _drift_term(state, dp, dset, M, config, params, dq_anchor, dq) -> complex:
    if not state.drivers.n:
        return 0j
    xis, xistars = state.drivers.xi_array, state.drivers.xistar_array
    g = [drift_g(n, xis, xistars, config.kappa, params, config.generalized_drivers).real
         for n in range(state.drivers.n)]
    return predicted_drift(dp, dset, M, config.kappa, params.sigma, g, dq_anchor, dq)


def _pair_terms(state, dp: DoublePoint, dset: DriverSet, kappa, anchor, ref, m):
    """One-point martingales of drivers 1 and 2 before the step, with the kernel products."""
    pair = _pair_indices(dset)
    if pair is None:
        return None
    i, j = pair
    d1, d2 = dset.restricted(i), dset.restricted(j)
    M1 = martingale_M(dp, d1, kappa, anchor=anchor, reference=ref).M
    M2 = martingale_M(dp, d2, kappa, anchor=anchor, reference=ref).M
    zetas = source_points(state.map, dset.xis[[i, j]])
    variation = elementary_deformation(state.map, zetas[0], zetas[1], anchor, m)
    _, dz = eval_map(state.map, dp.w)
    return {
        "M": (M1, M2),
        "alpha": dset.alphas[i] * dset.alphas[j],
        "variation": variation,
        "wprime_sq": 1.0 / abs(dz) ** 2,
        "kernels": noise_kernel_sum(dp, d1) * noise_kernel_sum(dp, d2),
    }


def _pair_indices(dset: DriverSet) -> Optional[Tuple[int, int]]:
    drivers = np.flatnonzero(dset.normalized)
    if drivers.size < 2:
        return None
    return int(drivers[0]), int(drivers[1])


def _pair_realized(before, dp, dset_after, kappa, anchor, ref, nu, dq_noise):
    """Realized dM1 dM2 and both forms of its prediction.

    The variation of the Green's function is 1/2 |w'(s)|^2 ReK_1 ReK_2, so
    -(4 nu/kappa) alpha_1 alpha_2 M1 M2 (dG/dt) dt equals the Ito covariance
    -(2/kappa) M1 M2 k_1 k_2 dq once dt is read on the anchor clock dq = nu |w'(s)|^2 dt.
    """
    if before is None:
        return (0j, 0j, 0j)
    i, j = _pair_indices(dset_after)
    M1_after = martingale_M(dp, dset_after.restricted(i), kappa, anchor=anchor, reference=ref).M
    M2_after = martingale_M(dp, dset_after.restricted(j), kappa, anchor=anchor, reference=ref).M
    M1, M2 = before["M"]
    product = (M1_after - M1) * (M2_after - M2)
    dt_anchor = dq_noise / (nu * before["wprime_sq"])
    target_nominal = (-(4.0 * nu / kappa) * before["alpha"] * M1 * M2 * before["variation"]
                      * dt_anchor)
    target_ito = -(2.0 / kappa) * M1 * M2 * before["kernels"] * dq_noise
    return (complex(product), complex(target_nominal), complex(target_ito))


def _square_terms(state, params, dp, dset, kappa, anchor, M):
    """Per-unit-dq targets of the corollary: -(8/kappa) M^2 dP/dq and -(2/kappa) M^2 k^2.

    With a center driver carrying -2 sigma the kernel sum is -2 (sigma - 1/2 sum alpha ReK),
    which turns the second form into the first; the realized noise only sees the
    moving drivers.
    """
    if not dset.size:
        return (0j, 0j)
    variation = pressure_variation(state.map, state.drivers, params, anchor, w_s=dp.w)
    ks = noise_kernel_sum(dp, dset)
    return (-(8.0 / kappa) * M**2 * variation, -(2.0 / kappa) * M**2 * ks**2)


def _map_paths(fn: Callable, jobs: List[tuple], workers: int, executor: str) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    pool_cls = ProcessPoolExecutor if executor == "process" else ThreadPoolExecutor
    with pool_cls(max_workers=workers) as pool:
        futures = [pool.submit(fn, *job) for job in jobs]
        return [f.result() for f in futures]


def ensemble_verify(
    config: "RunConfig",
    check: str,
    n_paths: Optional[int] = None,
    workers: Optional[int] = None,
) -> EnsembleStats:
    """Run one identity check over an ensemble of independent paths.

    Every path starts from the configured initial state and uses the same anchor,
    chosen on that state. Results depend only on the config and seed, not on the
    number of workers.

    Args:
        config: Stochastic run configuration
        check: "mean_M", "prop2_cov" or "corollary"
        n_paths: Ensemble size; default config.n_paths
        workers: Parallel workers; default config.workers

    Returns:
        EnsembleStats with rows for the identity as nominal and its Ito-consistent form

    Raises:
        ConfigError: If the check does not apply to the config
        NoSPoint: If the initial state has no S-point
        NumericalError: Any abort of a path
    """
    config = _check_config(config, check)
    n_paths = n_paths or config.n_paths
    workers = workers or config.workers
    anchor = choose_anchor(initial_state_from_config(config), config.grid_m)
    logger.info(f"Check {check}: {n_paths} paths x {config.check_steps} steps, "
                f"anchor {anchor:.6g}, {config.driver_mode}")
    jobs = [(config, p, anchor) for p in range(n_paths)]
    records: List[PathRecord] = _map_paths(run_path, jobs, workers, config.executor)
    valid = np.array([r.valid_steps(config.check_steps) for r in records])
    gaps = tuple(int(g) for g in (~valid).sum(axis=0))
    rows = _rows(check, records, valid)
    for row in rows:
        logger.info(f"{row.check}/{row.identity}: estimate={row.estimate:.3e} "
                    f"stderr={row.stderr:.3e} z={row.z_score:.2f}")
    flow_failures = int(sum(r.flow_failures for r in records))
    if flow_failures:
        logger.warning(f"Check {check}: anchor not re-derived on {flow_failures} steps")
    return EnsembleStats(
        check=check,
        driver_mode=config.driver_mode,
        n_paths=n_paths,
        rows=tuple(rows),
        anchor=anchor,
        flow_gap=float(np.mean([r.flow_gap for r in records])),
        s_exits=int(sum(r.s_exits for r in records)),
        flow_failures=flow_failures,
        gaps=gaps,
    )


def _row(check: str, identity: str, samples) -> StatRow:
    s = summarize(samples)
    return StatRow(check=check, identity=identity, estimate=s.mean, stderr=s.stderr,
                   z_score=s.z_score)


def _step_rows(check: str, name: str, values: np.ndarray, valid: np.ndarray) -> List[StatRow]:
    """One row per step over the paths still in the S-set; a step with none is skipped."""
    rows = []
    for k in range(values.shape[1]):
        sample = values[valid[:, k], k]
        if not sample.size:
            logger.warning(f"{check}/{name}@{k + 1}: every path left the S-set, row skipped")
            continue
        rows.append(_row(check, f"{name}@{k + 1}", sample))
    return rows


def _rows(check: str, records: List[PathRecord], valid: np.ndarray) -> List[StatRow]:
    if check == MEAN_M:
        M = np.array([r.M for r in records])
        realized = np.array([r.dM_realized for r in records])
        noise_nominal = np.array([r.dM_nominal for r in records])
        noise_ito = np.array([r.dM_ito for r in records])
        drift = np.array([r.dM_drift for r in records])
        return (
            _step_rows(check, "ratio", M[:, 1:] / M[:, :1] - 1.0, valid)
            + _step_rows(check, "drift_nominal", realized - noise_nominal, valid)
            + _step_rows(check, "drift_ito", realized - noise_ito, valid)
            + _step_rows(check, "drift_predicted", realized - noise_ito - drift, valid)
        )
    if check == PROP2_COV:
        return [
            _row(check, "nominal", [r.pair_product - r.pair_nominal for r in records]),
            _row(check, "ito", [r.pair_product - r.pair_ito for r in records]),
        ]
    return [
        _row(check, "nominal", [r.square - r.square_nominal for r in records]),
        _row(check, "ito", [r.square - r.square_ito for r in records]),
    ]
