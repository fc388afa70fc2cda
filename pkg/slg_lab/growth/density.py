"""Growth density on the unit circle."""

import numpy as np

from slg_lab.conformal.mapping import BoundaryGrid
from slg_lab.drivers.sde import DriverState, RateParams
from slg_lab.errors import NegativeDensity

STOCHASTIC = "stochastic"
DETERMINISTIC = "deterministic"


def symmetric_kernel(nodes: np.ndarray, xi: complex, xistar: complex) -> np.ndarray:
    """(K + K*)/2 with K = (e + xi)/(e - xi) and its starred mirror at conj(e).

    On the conjugate slice this is Re K; on the literal double the real part is used.
    """
    k = (nodes + xi) / (nodes - xi)
    kstar = (np.conj(nodes) + xistar) / (np.conj(nodes) - xistar)
    return (0.5 * (k + kstar)).real


def density_bracket(nodes: np.ndarray, drivers: DriverState, params: RateParams) -> np.ndarray:
    """sigma - 1/2 sum alpha_n ReK_n at the given unit-circle points."""
    if drivers.n != params.n_drivers:
        raise ValueError(f"Got {drivers.n} drivers but {params.n_drivers} rates")
    bracket = np.full(np.shape(nodes), params.sigma, dtype=float)
    for alpha, xi, xistar in zip(params.alphas, drivers.xis, drivers.xistars):
        bracket -= 0.5 * alpha * symmetric_kernel(nodes, xi, xistar)
    return bracket


def density(
    cmap,
    drivers: DriverState,
    params: RateParams,
    mode: str,
    grid: BoundaryGrid,
    check: bool = True,
) -> np.ndarray:
    """Density rho on the grid nodes; normal velocity is |z'| * rho.

    Args:
        cmap: Conformal map the grid was built from
        drivers: Driving points (conjugate slice for a real density)
        params: Rate parameters
        mode: "stochastic" or "deterministic"
        grid: Boundary grid of ``cmap``
        check: Raise on negative samples

    Returns:
        Density samples

    Raises:
        NegativeDensity: If check and some sample is negative
    """
    inv_dz2 = grid.wprime_abs**2
    if mode == DETERMINISTIC:
        rho = params.bigQ / (2 * np.pi) * inv_dz2
    elif mode == STOCHASTIC:
        rho = params.nu * inv_dz2 * density_bracket(grid.nodes, drivers, params)
    else:
        raise ValueError(f"Unknown density mode: {mode}")
    if check:
        j = int(np.argmin(rho))
        if rho[j] < 0:
            raise NegativeDensity(
                f"Density {rho[j]:.3e} < 0 at phi={grid.phis[j]:.6f}",
                angle=float(grid.phis[j]),
                value=float(rho[j]),
            )
    return rho


def flux(rho: np.ndarray, grid: BoundaryGrid) -> float:
    """Total growth rate: integral of rho |z'|^2 dphi."""
    return float(np.sum(rho * np.abs(grid.dz_vals) ** 2) * grid.dphi)
