"""Driving points on the Schottky double: interaction drift, vertex product, clocks and stepping."""

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from slg_lab.conformal.mapping import ConformalMap, boundary_grid, eval_map, invert_map
from slg_lab.constants import CLOCK_SKEW_LIMIT, COINCIDENT_TOL
from slg_lab.errors import ClockSkew, CoincidentDrivers, DriverEscaped, NonpositiveDt

logger = logging.getLogger(__name__)

CONJUGATE_SLICE = "conjugate_slice"
LITERAL_DOUBLE = "literal_double"
DRIVER_MODES = (CONJUGATE_SLICE, LITERAL_DOUBLE)
EXACT = "exact"
FRACTAL = "fractal"


@dataclass(frozen=True)
class RateParams:
    """Sink rate, rate quantum and driver rates; sigma = Q/(2 pi nu) + sum(alpha)/2."""

    bigQ: float
    nu: float
    alphas: Tuple[float, ...] = ()
    sigma: float = field(init=False)

    def __post_init__(self):
        if self.bigQ <= 0:
            raise ValueError(f"Q must be positive, got {self.bigQ}")
        if self.nu <= 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        alphas = tuple(float(a) for a in self.alphas)
        if any(a <= 0 for a in alphas):
            raise ValueError("All driver rates alpha_n must be positive")
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "sigma", self.derived_sigma())

    @classmethod
    def from_config(cls, config) -> "RateParams":
        """Rates of a RunConfig (or anything with bigQ, nu and alphas)."""
        return cls(bigQ=config.bigQ, nu=config.nu, alphas=tuple(config.alphas))

    def derived_sigma(self) -> float:
        return self.bigQ / (2 * np.pi * self.nu) + 0.5 * sum(self.alphas)

    @property
    def n_drivers(self) -> int:
        return len(self.alphas)

    @property
    def alpha0(self) -> float:
        """Rate of the center driver in the generalized driver set."""
        return -2.0 * self.sigma

    @property
    def lambdas(self) -> Tuple[float, ...]:
        """Weights (lambda_0, lambda_1..N) of the generalized drift."""
        return (-self.sigma,) + (1.0,) * self.n_drivers


@dataclass(frozen=True)
class DriverState:
    """Holomorphic and antiholomorphic driving points with their clocks and anchors."""

    xis: Tuple[complex, ...]
    xistars: Tuple[complex, ...]
    qs: Tuple[float, ...]
    anchors: Tuple[complex, ...]
    w_accum: float = 0.0

    def __post_init__(self):
        n = len(self.xis)
        if not (len(self.xistars) == len(self.qs) == len(self.anchors) == n):
            raise ValueError("Driver arrays must all have length N")
        if any(abs(x) >= 1 for x in self.xis):
            raise DriverEscaped("A driving point lies outside the unit disk",
                                xi_abs=float(max(abs(x) for x in self.xis)))

    @property
    def n(self) -> int:
        return len(self.xis)

    @property
    def xi_array(self) -> np.ndarray:
        return np.array(self.xis, dtype=complex)

    @property
    def xistar_array(self) -> np.ndarray:
        return np.array(self.xistars, dtype=complex)


def initial_driver_state(
    cmap: ConformalMap, xis: Sequence[complex], anchors: Optional[Sequence[complex]] = None
) -> DriverState:
    """Drivers at rest with conjugate partners; anchors default to z(1/conj(xi))."""
    xis = tuple(complex(x) for x in xis)
    if anchors is None:
        anchors = tuple(complex(eval_map(cmap, 1.0 / np.conj(x))[0]) for x in xis)
    return DriverState(
        xis=xis,
        xistars=tuple(complex(np.conj(x)) for x in xis),
        qs=(0.0,) * len(xis),
        anchors=tuple(complex(a) for a in anchors),
    )


def _check_distinct(xis: np.ndarray) -> None:
    if xis.size < 2:
        return
    gaps = np.abs(xis[:, None] - xis[None, :])
    np.fill_diagonal(gaps, np.inf)
    if np.min(gaps) < COINCIDENT_TOL:
        raise CoincidentDrivers(f"Driving points coincide (gap {np.min(gaps):.3e})",
                                gap=float(np.min(gaps)))


def log_z_n_product(
    xis: Sequence[complex],
    xistars: Sequence[complex],
    kappa: float,
    sigma: Optional[float] = None,
) -> complex:
    """Logarithm of the vertex product Z_N.

    Moduli are formed with independent starred coordinates, |f|^2 = f * f_star.
    Passing ``sigma`` adds the center-driver factor prod |xi_k|^(-4 sigma / kappa).
    """
    if kappa <= 0:
        raise ValueError("The vertex product needs kappa > 0")
    x = np.asarray(xis, dtype=complex)
    xs = np.asarray(xistars, dtype=complex)
    _check_distinct(x)
    total = 0j
    n = x.size
    for i in range(n):
        for k in range(i):
            total += np.log((x[k] - x[i]) * (xs[k] - xs[i]))
        for k in range(i + 1):
            total += np.log((1 - x[k] * xs[i]) * (1 - xs[k] * x[i]))
    total *= 2.0 / kappa
    if sigma is not None and n:
        total += (-2.0 * sigma / kappa) * np.sum(np.log(x * xs))
    return complex(total)


def z_n_product(
    xis: Sequence[complex],
    xistars: Sequence[complex],
    kappa: float,
    sigma: Optional[float] = None,
):
    """Vertex product Z_N; real on the conjugate slice, complex on the literal double.

    Raises:
        CoincidentDrivers: If two driving points coincide
    """
    value = np.exp(log_z_n_product(xis, xistars, kappa, sigma))
    if abs(value.imag) <= 1e-12 * abs(value):
        return float(value.real)
    return complex(value)


def drift_g(
    n: int,
    xis: Sequence[complex],
    xistars: Sequence[complex],
    kappa: float,
    params: RateParams,
    generalized: bool = False,
) -> complex:
    """Interaction drift g_n of driver n.

    g_n = -(kappa/2) xi_n d/dxi_n log Z + 1/2 sum_{m != n} (xi_n + xi_m)/(xi_n - xi_m)
          + 1/2 sum_m (xi_n + 1/xi*_m)/(xi_n - 1/xi*_m)

    In generalized mode the fixed center driver xi_0 = 0 enters with weight
    lambda_0 = -sigma in both sums and through prod |xi_k|^(-4 sigma/kappa) in Z.

    Args:
        n: Driver index (0-based)
        xis: Holomorphic driving points
        xistars: Antiholomorphic driving points
        kappa: Diffusion coefficient (only the product kappa * d log Z enters, so 0 is allowed)
        params: Rate parameters (sigma for the generalized set)
        generalized: Include the center driver

    Returns:
        g_n (real on the conjugate slice up to rounding)
    """
    x = np.asarray(xis, dtype=complex)
    xs = np.asarray(xistars, dtype=complex)
    _check_distinct(x)
    xn = x[n]
    others = np.delete(x, n)
    prod = xn * xs
    # -(kappa/2) xi_n d log Z, kappa cancels against the 2/kappa exponent
    vertex = -np.sum(xn / (xn - others)) + np.sum(prod / (1 - prod)) + prod[n] / (1 - prod[n])
    pair = 0.5 * np.sum((xn + others) / (xn - others))
    mirror = 0.5 * np.sum((prod + 1) / (prod - 1))
    g = vertex + pair + mirror
    if generalized:
        # the center driver's pair (+lambda_0/2) and mirror (-lambda_0/2) terms cancel,
        # leaving sigma from prod |xi_k|^(-4 sigma/kappa)
        g += params.sigma
    return complex(g)


def drift_g_closed_form(n: int, xis: Sequence[complex], xistars: Sequence[complex]) -> complex:
    """g_n = -(2N - 1)/2 + x/(1 - x) with x = xi_n xi*_n; the constant is the pairwise part."""
    N = len(xis)
    x = complex(xis[n]) * complex(xistars[n])
    return -(2 * N - 1) / 2.0 + x / (1 - x)


def time_change(
    cmap: ConformalMap,
    anchors: Sequence[complex],
    nu: float,
    dt: float,
    mode: str = EXACT,
    alpha: float = 1.0,
    eps: Optional[Sequence[float]] = None,
    w_guesses: Optional[Sequence[complex]] = None,
) -> np.ndarray:
    """Auxiliary-time increments dq_n of every driver.

    Args:
        cmap: Current conformal map
        anchors: Fixed z-plane fjord-tip anchors
        nu: Rate quantum
        dt: Physical time increment
        mode: "exact" (nu |w'(anchor)|^2 dt) or "fractal" (nu eps^(2 alpha) dt)
        alpha: Fractal exponent
        eps: Fractal length scales; default is the anchor distance to the boundary
        w_guesses: Warm starts for the anchor inversions

    Returns:
        Array of dq_n

    Raises:
        NonpositiveDt: If dt <= 0
    """
    if dt <= 0:
        raise NonpositiveDt(f"Time increment must be positive, got {dt}", dt=float(dt))
    if mode == EXACT:
        dqs = []
        for i, anchor in enumerate(anchors):
            guess = None if w_guesses is None else w_guesses[i]
            w = invert_map(cmap, anchor, guess)
            _, dz = eval_map(cmap, w)
            dqs.append(nu * dt / abs(dz) ** 2)
        return np.array(dqs, dtype=float)
    if mode == FRACTAL:
        if eps is None:
            contour = boundary_grid(cmap, 1024).z_vals
            eps = [float(np.min(np.abs(contour - a))) for a in anchors]
        return nu * dt * np.asarray(eps, dtype=float) ** (2 * alpha)
    raise ValueError(f"Unknown time-change mode: {mode}")


def step_drivers(
    state: DriverState,
    dqs: Sequence[float],
    dW: float,
    params: RateParams,
    kappa: float,
    mode: str = CONJUGATE_SLICE,
    generalized: bool = False,
    skew_limit: float = CLOCK_SKEW_LIMIT,
) -> DriverState:
    """One log-coordinate Euler-Maruyama step of the driving points.

    d log xi_n = (-sigma + g_n + kappa/4) dq_n + i dW; on the literal double
    d log xi*_n = (sigma - g*_n + kappa/4) dq_n - i dW, otherwise xi*_n = conj(xi_n).

    Raises:
        ClockSkew: If the auxiliary clocks disagree beyond ``skew_limit``
        DriverEscaped: If a driving point reaches the unit circle
    """
    if mode not in DRIVER_MODES:
        raise ValueError(f"Unknown driver mode: {mode}")
    dqs = np.asarray(dqs, dtype=float)
    if dqs.size != state.n:
        raise ValueError("Need one auxiliary time increment per driver")
    if state.n == 0:
        return replace(state, w_accum=state.w_accum + dW)
    dq_ref = float(np.mean(dqs))
    if dq_ref > 0:
        skew = float(np.max(np.abs(dqs - dq_ref)) / dq_ref)
        if skew > skew_limit:
            raise ClockSkew(f"Auxiliary clocks skewed by {skew:.1%}", skew=skew)
        if skew > 0.5 * skew_limit:
            logger.warning(f"Auxiliary clock skew {skew:.1%} is close to the limit")

    xis = state.xi_array
    xistars = state.xistar_array
    quarter = 0.25 * kappa
    new_xis = []
    new_stars = []
    for n in range(state.n):
        g = drift_g(n, xis, xistars, kappa, params, generalized)
        rate = (-params.sigma + g + quarter) * dqs[n]
        new_xis.append(_advance(xis[n], rate, dW))
        if mode == LITERAL_DOUBLE:
            g_star = drift_g(n, xistars, xis, kappa, params, generalized)
            rate_star = (params.sigma - g_star + quarter) * dqs[n]
            new_stars.append(_advance(xistars[n], rate_star, -dW))
    if mode == CONJUGATE_SLICE:
        new_stars = [complex(np.conj(x)) for x in new_xis]

    escaped = [abs(x) for x in new_xis if abs(x) >= 1]
    if escaped:
        raise DriverEscaped(f"Driving point reached |xi|={max(escaped):.12f}",
                            xi_abs=float(max(escaped)))
    return DriverState(
        xis=tuple(new_xis),
        xistars=tuple(new_stars),
        qs=tuple(q + dq for q, dq in zip(state.qs, dqs)),
        anchors=state.anchors,
        w_accum=state.w_accum + dW,
    )


def _advance(point: complex, rate: complex, dW: float) -> complex:
    """point * exp(rate + i dW), with modulus and argument updated separately."""
    if point == 0:
        return 0j
    modulus = abs(point) * np.exp(rate.real)
    angle = np.angle(point) + rate.imag + dW
    return complex(modulus * np.exp(1j * angle))
