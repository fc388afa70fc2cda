"""Points on the Schottky double, the h-function and the exponential martingale."""

import logging
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from slg_lab.conformal.mapping import BoundaryGrid, ConformalMap, eval_map, invert_map
from slg_lab.conformal.potential import ANTIHOLOMORPHIC, HOLOMORPHIC, HerglotzTransform
from slg_lab.constants import COLLISION_TOL, S_POINT_THRESHOLD
from slg_lab.drivers.sde import DriverState, RateParams
from slg_lab.errors import DriverCollision

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DriverSet:
    """Driving points entering h and M, with rates; ``normalized`` marks a log(xi) term."""

    xis: np.ndarray
    xistars: np.ndarray
    alphas: np.ndarray
    normalized: np.ndarray

    @property
    def size(self) -> int:
        return self.xis.size

    def restricted(self, index: int) -> "DriverSet":
        """Same points with every rate but ``index`` set to zero."""
        alphas = np.zeros_like(self.alphas)
        alphas[index] = self.alphas[index]
        return replace(self, alphas=alphas)


def driver_set(drivers: DriverState, params: RateParams, generalized: bool = False) -> DriverSet:
    """Drivers 1..N, preceded by the center driver xi_0 = 0 with alpha_0 = -2 sigma if generalized.

    The log(xi_0) normalization of the center driver is dropped.
    """
    xis = drivers.xi_array
    xistars = drivers.xistar_array
    alphas = np.array(params.alphas, dtype=float)
    normalized = np.ones(xis.size, dtype=bool)
    if generalized:
        xis = np.concatenate([[0j], xis])
        xistars = np.concatenate([[0j], xistars])
        alphas = np.concatenate([[params.alpha0], alphas])
        normalized = np.concatenate([[False], normalized])
    return DriverSet(xis=xis, xistars=xistars, alphas=alphas, normalized=normalized)


@dataclass(frozen=True)
class DoublePoint:
    """A boundary anchor seen from both sides of the double.

    ``log_factor_parts[n]`` accumulates -2 [w xi/(w - xi)^2 - w* xi*/(w* - xi*)^2] dq for
    driver n, so that log(w' w*'/(w w*)) = sum(alpha_n * part_n). ``wprime`` and
    ``wstarprime`` are the side factors, kept for diagnostics.
    """

    w: complex
    wstar: complex
    log_factor_parts: Tuple[complex, ...] = ()
    wprime: complex = 1.0 + 0j
    wstarprime: complex = 1.0 + 0j
    q: float = 0.0

    @classmethod
    def from_anchor(
        cls, cmap: ConformalMap, s: complex, n_terms: int, w_guess: Optional[complex] = None
    ) -> "DoublePoint":
        """Initialize at a boundary point: w* = 1/w and unit conformal factors."""
        w = invert_map(cmap, s, w_guess, strict=False)
        return cls(w=complex(w), wstar=complex(1.0 / w), log_factor_parts=(0j,) * n_terms)

    def log_factor_ratio(self, alphas: Sequence[float]) -> complex:
        if not self.log_factor_parts:
            return 0j
        return complex(np.dot(np.asarray(alphas, dtype=float), self.log_factor_parts))


def evolve_double(
    dp: DoublePoint,
    density: np.ndarray,
    dt: float,
    *,
    dset: Optional[DriverSet] = None,
    dq: float = 0.0,
    herglotz: Optional[HerglotzTransform] = None,
) -> DoublePoint:
    """Euler step dw = w p dt, dw* = -w* p* dt of the double-point flow.

    Args:
        dp: Current double point
        density: Growth density on the uniform grid of the current map
        dt: Physical time step
        dset: Driving points for the conformal-factor increment (None means N = 0)
        dq: Auxiliary time increment at the anchor
        herglotz: Prebuilt transform of ``density``

    Returns:
        The advanced DoublePoint

    Raises:
        GridTooCoarse: If the density is not resolved at w or w*
    """
    transform = herglotz or HerglotzTransform(density)
    p = transform(dp.w, HOLOMORPHIC)
    pstar = transform(dp.wstar, ANTIHOLOMORPHIC)
    dlog_w = p * dt
    dlog_wstar = -pstar * dt
    parts = dp.log_factor_parts
    wprime = dp.wprime * np.exp(dlog_w)
    wstarprime = dp.wstarprime * np.exp(dlog_wstar)
    if dset is not None and dset.size:
        _check_collision(dp, dset)
        hol = dp.w * dset.xis / (dp.w - dset.xis) ** 2
        anti = dp.wstar * dset.xistars / (dp.wstar - dset.xistars) ** 2
        increments = -2.0 * (hol - anti) * dq
        parts = tuple(complex(a + b) for a, b in zip(parts, increments))
        wprime *= np.exp(-2.0 * np.dot(dset.alphas, hol) * dq)
        wstarprime *= np.exp(2.0 * np.dot(dset.alphas, anti) * dq)
    return replace(
        dp,
        w=complex(dp.w * (1.0 + p * dt)),
        wstar=complex(dp.wstar * (1.0 - pstar * dt)),
        log_factor_parts=parts,
        wprime=complex(wprime),
        wstarprime=complex(wstarprime),
        q=dp.q + dq,
    )


def _check_collision(dp: DoublePoint, dset: DriverSet) -> None:
    gap = min(np.min(np.abs(dp.w - dset.xis)), np.min(np.abs(dp.wstar - dset.xistars)))
    if gap < COLLISION_TOL:
        raise DriverCollision(f"Double point within {gap:.3e} of a driving point", gap=float(gap))


def _continued(values: np.ndarray, reference: Optional[np.ndarray]) -> np.ndarray:
    logs = np.log(values)
    if reference is None:
        return logs
    turns = np.round((reference.imag - logs.imag) / (2 * np.pi))
    return logs + 2j * np.pi * turns


def h_logs(dp: DoublePoint, dset: DriverSet, reference: Optional[np.ndarray] = None) -> np.ndarray:
    """Logarithms entering g1 and g2, shape (6, n), continued from ``reference``.

    Rows: log(w - xi), log(1 - w* xi), log xi, log(w* - xi*), log(1 - w xi*), log xi*.

    Raises:
        DriverCollision: If w meets a driving point
    """
    _check_collision(dp, dset)
    values = np.array([
        dp.w - dset.xis,
        1.0 - dp.wstar * dset.xis,
        np.where(dset.normalized, dset.xis, 1.0),
        dp.wstar - dset.xistars,
        1.0 - dp.w * dset.xistars,
        np.where(dset.normalized, dset.xistars, 1.0),
    ], dtype=complex)
    return _continued(values, reference)


def h_function(
    dp: DoublePoint, dset: DriverSet, kappa: float, reference: Optional[np.ndarray] = None
) -> complex:
    """h = (g1 - g2)/sqrt(kappa) + (sqrt(kappa)/4) log(w' w*'/(w w*)).

    Raises:
        ValueError: If kappa <= 0
        DriverCollision: If w meets a driving point
    """
    if kappa <= 0:
        raise ValueError("h needs kappa > 0")
    if not dset.size:
        return complex(np.sqrt(kappa) / 4 * dp.log_factor_ratio(()))
    logs = h_logs(dp, dset, reference)
    g1 = np.dot(dset.alphas, logs[0] + logs[1] - logs[2])
    g2 = np.dot(dset.alphas, logs[3] + logs[4] - logs[5])
    root = np.sqrt(kappa)
    return complex((g1 - g2) / root + root / 4 * dp.log_factor_ratio(dset.alphas))


def kernel_terms(dp: DoublePoint, dset: DriverSet) -> np.ndarray:
    """(K_n + K*_n)/2 per driver with K = (w + xi)/(w - xi) and its starred mirror."""
    k = (dp.w + dset.xis) / (dp.w - dset.xis)
    kstar = (dp.wstar + dset.xistars) / (dp.wstar - dset.xistars)
    return 0.5 * (k + kstar)


def kernel_sum(dp: DoublePoint, dset: DriverSet) -> complex:
    """sum alpha_n (K_n + K*_n)/2."""
    if not dset.size:
        return 0j
    return complex(np.dot(dset.alphas, kernel_terms(dp, dset)))


def noise_kernel_sum(dp: DoublePoint, dset: DriverSet) -> complex:
    """Coefficient of -2i dW in d(g1 - g2): the exact log-derivatives of h in the drivers.

    Equals kernel_sum while w* = 1/w. Away from the circle each side mixes K with
    (1 + w* xi)/(1 - w* xi); a driver without the log(xi) normalization loses the
    constant 1, so the center driver at the origin contributes nothing.
    """
    if not dset.size:
        return 0j
    k = (dp.w + dset.xis) / (dp.w - dset.xis)
    k_cross = (1 + dp.wstar * dset.xis) / (1 - dp.wstar * dset.xis)
    kstar = (dp.wstar + dset.xistars) / (dp.wstar - dset.xistars)
    kstar_cross = (1 + dp.w * dset.xistars) / (1 - dp.w * dset.xistars)
    per_driver = 0.25 * (k + k_cross + kstar + kstar_cross) - np.where(dset.normalized, 0.0, 1.0)
    return complex(np.dot(dset.alphas, per_driver))


@dataclass(frozen=True)
class MartingaleSample:
    """M = exp(h/sqrt(kappa)) at a double point with its predicted increments for a given dW."""

    anchor: complex
    dp: DoublePoint
    h: complex
    M: complex
    q: float
    dM: complex = 0j
    dM_ito: complex = 0j


def martingale_M(
    dp: DoublePoint,
    dset: DriverSet,
    kappa: float,
    dW: float = 0.0,
    *,
    anchor: complex = 0j,
    reference: Optional[np.ndarray] = None,
) -> MartingaleSample:
    """Evaluate M and its predicted stochastic increment.

    ``dM`` uses the prefactor -2i/sqrt(kappa); ``dM_ito`` uses -2i/kappa, which is what
    Ito's lemma gives for exp(h/sqrt(kappa)) when the noise part of dh carries 1/sqrt(kappa).
    Both take the noise coefficient from noise_kernel_sum.
    """
    h = h_function(dp, dset, kappa, reference)
    M = complex(np.exp(h / np.sqrt(kappa)))
    drive = M * noise_kernel_sum(dp, dset) * dW
    return MartingaleSample(
        anchor=complex(anchor),
        dp=dp,
        h=h,
        M=M,
        q=dp.q,
        dM=complex(-2j / np.sqrt(kappa) * drive),
        dM_ito=complex(-2j / kappa * drive),
    )


def predicted_drift(
    dp: DoublePoint,
    dset: DriverSet,
    M: complex,
    kappa: float,
    sigma: float,
    g: Sequence[float],
    dq_anchor: float,
    dq: Sequence[float],
) -> complex:
    """Drift of M over one step when the interaction drifts g_n are kept.

    dM = (M/kappa) [sum alpha_n R_n ((-2 sigma + S) dq_s + 2 (sigma - g_n) dq_n) - S^2 dq]
    with R_n = (K_n + K*_n)/2 and S = sum alpha_n R_n over the moving drivers, dq_s the
    anchor clock and dq the mean driver clock. It vanishes when every g_n = 0 and the
    clocks agree. The center driver does not move and is left out.
    """
    moving = np.flatnonzero(dset.normalized)
    if not moving.size:
        return 0j
    weighted = dset.alphas[moving] * kernel_terms(dp, dset)[moving]
    S = np.sum(weighted)
    dq_n = np.asarray(dq, dtype=float)
    g_n = np.asarray(g, dtype=float)
    total = np.sum(weighted * ((-2.0 * sigma + S) * dq_anchor + 2.0 * (sigma - g_n) * dq_n))
    return complex(M / kappa * (total - S**2 * np.mean(dq_n)))


def rederived_w(cmap: ConformalMap, anchor: complex, w_guess: complex) -> complex:
    """Anchor preimage under the current map, for comparison with the flow."""
    return invert_map(cmap, anchor, w_guess, strict=False)


def anchor_dq(cmap: ConformalMap, w: complex, nu: float, dt: float) -> float:
    """dq = nu |w'(s)|^2 dt at the anchor."""
    _, dz = eval_map(cmap, w)
    return float(nu * dt / abs(dz) ** 2)


def in_S(cmap: ConformalMap, w: complex) -> bool:
    """Distance condition of the S-set: w is closer to the unit circle than the pole of z'
    nearest to it in angle."""
    poles = cmap.sings
    if not poles.size:
        return False
    gaps = np.abs(np.angle(poles / w))
    nearest = poles[int(np.argmin(gaps))]
    return bool(abs(1.0 - abs(w)) < 1.0 - abs(nearest))


def find_S_points(cmap: ConformalMap, grid: BoundaryGrid) -> List[complex]:
    """Boundary anchors where |w'| has a strict local extremum and the S-set distance holds.

    Anchors are returned in increasing order of |w'|, so the deepest point comes first.
    A circle (or any map without log terms) has none.
    """
    if not cmap.terms:
        logger.debug("No log singularities; S-set is empty")
        return []
    wp = grid.wprime_abs
    left = np.roll(wp, 1)
    right = np.roll(wp, -1)
    tol = S_POINT_THRESHOLD * float(np.max(wp))
    maxima = (wp - left > tol) & (wp - right > tol)
    minima = (left - wp > tol) & (right - wp > tol)
    candidates = np.flatnonzero(maxima | minima)
    chosen = [j for j in candidates if in_S(cmap, grid.nodes[j])]
    chosen.sort(key=lambda j: wp[j])
    logger.debug(f"{len(candidates)} extrema of |w'|, {len(chosen)} in the S-set")
    return [complex(grid.z_vals[j]) for j in chosen]
