"""Potential theory of the fluid domain: Green's function, Poisson kernel, Herglotz transform."""

import logging
from typing import Optional, Union

import numpy as np

from slg_lab.conformal.mapping import BoundaryGrid, ConformalMap, eval_map, invert_map
from slg_lab.constants import HERGLOTZ_KERNEL_SWITCH, HERGLOTZ_TAIL_TOL
from slg_lab.errors import GridTooCoarse

logger = logging.getLogger(__name__)

HOLOMORPHIC = "holomorphic"
ANTIHOLOMORPHIC = "antiholomorphic"
_KERNEL_CHUNK = 256


def green_w(w1: complex, w2: complex) -> float:
    """Green's function of the disk exterior in the w-plane."""
    return float(np.log(abs(w1 - w2) / abs(1.0 - np.conj(w1) * w2)))


def green_function(
    cmap: ConformalMap,
    z1: complex,
    z2: complex,
    *,
    w1_guess: Optional[complex] = None,
    w2_guess: Optional[complex] = None,
    strict: bool = True,
) -> float:
    """Dirichlet Green's function G(z1, z2) of the fluid domain.

    Args:
        cmap: Conformal map of the fluid domain
        z1: First point
        z2: Second point (may lie on the boundary)
        w1_guess: Optional warm start for inverting z1
        w2_guess: Optional warm start for inverting z2
        strict: Forwarded to invert_map; False continues G harmonically into the cluster

    Returns:
        G(z1, z2), non-positive in the fluid and zero on the boundary
    """
    w1 = invert_map(cmap, z1, w1_guess, strict=strict)
    w2 = invert_map(cmap, z2, w2_guess, strict=strict)
    return green_w(w1, w2)


def green_to_infinity(cmap: ConformalMap, z: complex, w_guess: Optional[complex] = None) -> float:
    """The sink potential log|w(z)|."""
    return float(np.log(abs(invert_map(cmap, z, w_guess))))


def kernel_real_part(nodes: np.ndarray, xi: complex) -> np.ndarray:
    """Re[(e + xi) / (e - xi)] for unit-circle nodes e, written in its positive form."""
    return (1.0 - abs(xi) ** 2) / np.abs(nodes - xi) ** 2


def reflected_point(w: complex) -> complex:
    """xi = 1/conj(w); infinity maps to 0."""
    if np.isinf(w):
        return 0j
    return 1.0 / np.conj(w)


def poisson_kernel(
    cmap: ConformalMap,
    z: complex,
    s: complex,
    *,
    w_z: Optional[complex] = None,
    w_s: Optional[complex] = None,
) -> float:
    """Poisson kernel H(z, s) of the fluid domain for a boundary point s.

    ``z`` may be ``complex('inf')``, which gives the harmonic measure from infinity.
    Known preimages can be passed through ``w_z`` and ``w_s``.
    """
    if w_z is None:
        w_z = complex("inf") if np.isinf(z) else invert_map(cmap, z)
    if w_s is None:
        w_s = invert_map(cmap, s, strict=False)
    e = w_s / abs(w_s)
    _, dz = eval_map(cmap, e)
    xi = reflected_point(w_z)
    return float(kernel_real_part(np.array([e]), xi)[0] / abs(dz))


def harmonic_measure_on_grid(grid: BoundaryGrid, xi: complex) -> np.ndarray:
    """Poisson kernel H(z, s_j) on every grid node, for z with reflected point xi."""
    return kernel_real_part(grid.nodes, xi) * grid.wprime_abs


class HerglotzTransform:
    """Herglotz transform p(w) = -(1/2pi) * integral of rho (w + e)/(w - e) dphi.

    Far from the circle the kernel is integrated by the trapezoid rule; closer in,
    the Fourier series of the density is summed, which gives the boundary limit
    (Re p = -rho, Im p from the conjugate series) and the continuation to |w| < 1.
    """

    def __init__(self, density: np.ndarray):
        rho = np.asarray(density, dtype=float)
        if rho.ndim != 1 or rho.size < 8 or rho.size % 2:
            raise ValueError("Density must be a 1-D array of even length >= 8")
        self.samples = rho
        self.m = rho.size
        self.nodes = np.exp(2j * np.pi * np.arange(self.m) / self.m)
        c = np.fft.ifft(rho)
        half = self.m // 2
        series = np.zeros(half + 1, dtype=complex)
        series[0] = c[0]
        series[1:half] = 2.0 * c[1:half]
        series[half] = c[half]
        self.series = series
        with np.errstate(divide="ignore"):
            self._log_abs = np.log(np.abs(series))

    def __call__(self, w: Union[complex, np.ndarray], side: str = HOLOMORPHIC):
        if side == HOLOMORPHIC:
            return self._holomorphic(w)
        if side == ANTIHOLOMORPHIC:
            return np.conj(self._holomorphic(np.conj(w)))
        raise ValueError(f"Unknown side: {side}")

    def _holomorphic(self, w):
        scalar = np.ndim(w) == 0
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        out = np.empty(w.shape, dtype=complex)
        far = self.m * np.log(np.abs(w)) > HERGLOTZ_KERNEL_SWITCH
        if np.any(far):
            out[far] = self._kernel(w[far])
        if np.any(~far):
            out[~far] = self._series(w[~far])
        return complex(out[0]) if scalar else out

    def _kernel(self, w: np.ndarray) -> np.ndarray:
        values = np.empty(w.shape, dtype=complex)
        for start in range(0, w.size, _KERNEL_CHUNK):
            chunk = w[start:start + _KERNEL_CHUNK, None]
            kern = (chunk + self.nodes) / (chunk - self.nodes)
            values[start:start + _KERNEL_CHUNK] = -(kern @ self.samples) / self.m
        return values

    def _series(self, w: np.ndarray) -> np.ndarray:
        u = 1.0 / w
        log_u = float(np.log(np.max(np.abs(u))))
        k = np.arange(self.series.size)
        weights = np.exp(self._log_abs + k * log_u)
        total = float(np.sum(weights))
        tail = float(np.sum(weights[3 * self.m // 8:]))
        if total > 0 and tail > HERGLOTZ_TAIL_TOL * total:
            raise GridTooCoarse(
                f"Density is not resolved at |w|={1.0 / np.exp(log_u):.6g} "
                f"(relative series tail {tail / total:.2e})",
                tail=tail / total,
            )
        return -np.polynomial.polynomial.polyval(u, self.series)


def herglotz_transform(density: np.ndarray, w, side: str = HOLOMORPHIC):
    """One-shot Herglotz transform; build a HerglotzTransform to reuse the FFT."""
    return HerglotzTransform(density)(w, side)


def hadamard_rate(
    cmap: ConformalMap,
    density: np.ndarray,
    z1: complex,
    z2: complex,
    *,
    w1: Optional[complex] = None,
    w2: Optional[complex] = None,
) -> float:
    """Rate of change dG(z1, z2)/dt of the Dirichlet Green's function under growth.

    The boundary moves with normal velocity |z'| * density, so
    dG/dt = (1/2pi) * integral of ReK(z1) ReK(z2) density dphi. ``z1`` may be
    ``complex('inf')``; ``z2`` may lie on the boundary, where the rate is the
    boundary value ReK(z1) * density.
    """
    if w1 is None:
        w1 = complex("inf") if np.isinf(z1) else invert_map(cmap, z1)
    if w2 is None:
        w2 = invert_map(cmap, z2, strict=False)
    m = len(density)
    nodes = np.exp(2j * np.pi * np.arange(m) / m)
    weighted = kernel_real_part(nodes, reflected_point(w1)) * np.asarray(density, dtype=float)
    return float(-HerglotzTransform(weighted)(w2).real)
