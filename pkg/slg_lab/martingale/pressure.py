"""Effective pressure near the interface and its variations under growth."""

import logging
from typing import Optional

import numpy as np

from slg_lab.conformal.mapping import ConformalMap, boundary_grid, eval_map, invert_map
from slg_lab.conformal.potential import HerglotzTransform, hadamard_rate, kernel_real_part
from slg_lab.constants import DEFAULT_GRID_M
from slg_lab.drivers.sde import DriverState, RateParams
from slg_lab.errors import InsideCluster
from slg_lab.growth.density import STOCHASTIC, density, density_bracket

logger = logging.getLogger(__name__)

BOUNDARY_TOL = 1e-12


def green_to_source(w: complex, xi: complex) -> float:
    """G(z, zeta) in the w-plane for the source with w-image 1/conj(xi); non-positive."""
    return float(np.log(abs(1.0 - np.conj(xi) * w) / abs(w - xi)))


def pressure(
    cmap: ConformalMap,
    drivers: DriverState,
    params: RateParams,
    z: complex,
    w_guess: Optional[complex] = None,
) -> float:
    """P(z) = sigma log|w(z)| - 1/2 sum alpha_n G(z, zeta_n).

    Raises:
        InsideCluster: If z is not in the fluid domain
        NoConvergence: If the inversion fails
    """
    w = invert_map(cmap, z, w_guess)
    value = params.sigma * np.log(abs(w))
    for alpha, xi in zip(params.alphas, drivers.xis):
        value -= 0.5 * alpha * green_to_source(w, xi)
    return float(value)


def _boundary_unit(cmap: ConformalMap, s: complex, w_s: Optional[complex]) -> complex:
    if w_s is None:
        w_s = invert_map(cmap, s, strict=False)
    return w_s / abs(w_s)


def pressure_variation(
    cmap: ConformalMap,
    drivers: DriverState,
    params: RateParams,
    s: complex,
    w_s: Optional[complex] = None,
) -> float:
    """dP/dq at a boundary point: the squared density bracket at w(s)."""
    e = _boundary_unit(cmap, s, w_s)
    bracket = float(density_bracket(np.array([e]), drivers, params)[0])
    return bracket**2


def pressure_variation_quadrature(
    cmap: ConformalMap,
    drivers: DriverState,
    params: RateParams,
    s: complex,
    m: int = DEFAULT_GRID_M,
    w_s: Optional[complex] = None,
) -> float:
    """dP/dq assembled from Hadamard rates of the Green's functions that build P.

    With the Dirichlet sign convention of ``hadamard_rate`` (the rate at a boundary
    point is ReK * density), sigma * rate(inf, s) - 1/2 sum alpha_n rate(zeta_n, s)
    divided by nu |w'(s)|^2 reproduces the squared bracket.
    """
    e = _boundary_unit(cmap, s, w_s)
    grid = boundary_grid(cmap, m)
    rho = density(cmap, drivers, params, STOCHASTIC, grid)
    total = params.sigma * hadamard_rate(cmap, rho, complex("inf"), s, w1=complex("inf"), w2=e)
    for alpha, xi in zip(params.alphas, drivers.xis):
        w_source = 1.0 / np.conj(xi) if xi != 0 else complex("inf")
        total -= 0.5 * alpha * hadamard_rate(cmap, rho, 0j, s, w1=w_source, w2=e)
    _, dz = eval_map(cmap, e)
    return float(total * abs(dz) ** 2 / params.nu)


def elementary_deformation(
    cmap: ConformalMap,
    zeta: complex,
    z1: complex,
    z2: complex,
    m: int = DEFAULT_GRID_M,
) -> float:
    """Variation of G(z1, z2) under the elementary deformation with base point zeta.

    (1/4pi) * integral of H(zeta, s) H(z1, s) H(z2, s) |ds|, the triple product of
    Poisson kernels. The point closest to the boundary is evaluated through the
    Herglotz transform of the other two kernels; if it lies on the boundary the
    value is 1/2 H(zeta, s) H(z1, s).

    Raises:
        InsideCluster: If a point lies inside the cluster
    """
    ws = [invert_map(cmap, z, strict=False) for z in (zeta, z1, z2)]
    order = np.argsort([abs(w) for w in ws])
    w_near = ws[order[0]]
    if abs(w_near) < 1.0 - BOUNDARY_TOL:
        raise InsideCluster(f"Point with |w|={abs(w_near):.6g} lies inside the cluster",
                            w_abs=float(abs(w_near)))
    grid = boundary_grid(cmap, m)
    weight = grid.wprime_abs**2
    for k in order[1:]:
        weight = weight * kernel_real_part(grid.nodes, 1.0 / np.conj(ws[k]))
    if abs(w_near) - 1.0 < BOUNDARY_TOL:
        e = w_near / abs(w_near)
        j = int(np.argmin(np.abs(grid.nodes - e)))
        if abs(grid.nodes[j] - e) < BOUNDARY_TOL:
            return float(0.5 * weight[j])
        w_near = e
    return float(-0.5 * HerglotzTransform(weight)(w_near).real)
