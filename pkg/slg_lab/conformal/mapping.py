"""Logarithmic conformal maps from the exterior of the unit disk onto the fluid domain."""

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from slg_lab.constants import INSIDE_TOL, INVERT_MAX_ITER, INVERT_TOL
from slg_lab.errors import CuspDetected, DomainContainsOrigin, InsideCluster, NoConvergence

logger = logging.getLogger(__name__)

ComplexLike = Union[complex, np.ndarray]


@dataclass(frozen=True)
class LogTerm:
    """One term ``coeff * log(1 - sing / w)`` of the map."""

    coeff: complex
    sing: complex

    def __post_init__(self):
        if abs(self.sing) >= 1.0:
            raise CuspDetected(
                f"Log singularity {self.sing} is not inside the unit disk",
                sing_abs=float(abs(self.sing)),
            )


@dataclass(frozen=True)
class ConformalMap:
    """z(w) = radius * w + center + sum(coeff * log(1 - sing / w)) for |w| >= 1.

    ``branch_offsets`` counts, per term, the whole turns that ``arg(sing)`` has made
    since the term was created, so ``log(sing)`` stays continuous along a run.
    """

    radius: float
    terms: Tuple[LogTerm, ...] = ()
    branch_offsets: Tuple[int, ...] = ()
    center: complex = 0j

    def __post_init__(self):
        if not np.isfinite(self.radius) or self.radius <= 0:
            raise ValueError(f"Conformal radius must be positive, got {self.radius}")
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.branch_offsets:
            object.__setattr__(self, "branch_offsets", (0,) * len(self.terms))
        if len(self.branch_offsets) != len(self.terms):
            raise ValueError("branch_offsets must have one entry per log term")
        object.__setattr__(self, "branch_offsets", tuple(int(k) for k in self.branch_offsets))
        object.__setattr__(self, "center", complex(self.center))

    @property
    def coeffs(self) -> np.ndarray:
        return np.array([t.coeff for t in self.terms], dtype=complex)

    @property
    def sings(self) -> np.ndarray:
        return np.array([t.sing for t in self.terms], dtype=complex)

    def log_sings(self) -> np.ndarray:
        """Continuous-branch logarithms of the singularities."""
        offsets = np.array(self.branch_offsets, dtype=float)
        return np.log(self.sings) + 2j * np.pi * offsets

    @classmethod
    def circle(cls, radius: float, center: complex = 0j) -> "ConformalMap":
        return cls(radius=radius, center=center)

    @classmethod
    def from_arrays(
        cls,
        radius: float,
        coeffs: Sequence[complex],
        sings: Sequence[complex],
        center: complex = 0j,
        branch_offsets: Sequence[int] = (),
    ) -> "ConformalMap":
        terms = tuple(LogTerm(complex(c), complex(a)) for c, a in zip(coeffs, sings))
        return cls(radius=float(radius), terms=terms, branch_offsets=tuple(branch_offsets),
                   center=center)


@dataclass(frozen=True)
class BoundaryGrid:
    """Uniform samples of the map and its derivative on the unit circle."""

    m: int
    phis: np.ndarray
    nodes: np.ndarray
    z_vals: np.ndarray
    dz_vals: np.ndarray
    wprime_abs: np.ndarray = field(repr=False)

    @property
    def dphi(self) -> float:
        return 2 * np.pi / self.m

    @property
    def dz_dphi(self) -> np.ndarray:
        return 1j * self.nodes * self.dz_vals


@dataclass(frozen=True)
class MomentVector:
    """Area moment t0, exterior moments t_k and interior moments v_k (k = 1..kmax)."""

    t0: float
    tk: np.ndarray
    vk: np.ndarray


def eval_map(cmap: ConformalMap, w: ComplexLike) -> Tuple[ComplexLike, ComplexLike]:
    """Evaluate the map and its derivative.

    Args:
        cmap: Conformal map
        w: Point or array of points with |w| >= 1 (slightly inside is allowed for
            continuation across the circle as long as |w| exceeds every |sing|)

    Returns:
        Tuple (z, dz) with the same shape as ``w``
    """
    scalar = np.ndim(w) == 0
    w = np.asarray(w, dtype=complex)
    z = cmap.radius * w + cmap.center
    dz = np.full(w.shape, cmap.radius, dtype=complex)
    inv_w = 1.0 / w
    for term in cmap.terms:
        z = z + term.coeff * np.log1p(-term.sing * inv_w)
        dz = dz + term.coeff * (1.0 / (w - term.sing) - inv_w)
    if scalar:
        return complex(z), complex(dz)
    return z, dz


def invert_map(
    cmap: ConformalMap,
    z: complex,
    w_guess: Optional[complex] = None,
    *,
    strict: bool = True,
    max_iter: int = INVERT_MAX_ITER,
) -> complex:
    """Solve z(w) = z for w by damped Newton iteration.

    Args:
        cmap: Conformal map
        z: Target point in the fluid domain
        w_guess: Starting point; defaults to (z - center) / radius
        strict: Raise InsideCluster when the solution lies inside the unit disk
        max_iter: Iteration cap

    Returns:
        Preimage w

    Raises:
        NoConvergence: If the residual does not reach tolerance
        InsideCluster: If strict and |w| < 1
    """
    z = complex(z)
    w = complex(w_guess) if w_guess is not None else (z - cmap.center) / cmap.radius
    if w == 0:
        w = 1.0 + 0j
    floor = float(np.max(np.abs(cmap.sings))) if cmap.terms else 0.0
    tol = INVERT_TOL * (1.0 + abs(z))

    zw, dz = eval_map(cmap, w)
    res = zw - z
    converged = abs(res) <= tol
    it = 0
    while not converged and it < max_iter:
        it += 1
        step = res / dz
        lam = 1.0
        while True:
            w_new = w - lam * step
            if abs(w_new) > floor:
                z_new, dz_new = eval_map(cmap, w_new)
                res_new = z_new - z
                if abs(res_new) < abs(res) or lam < 1e-8:
                    break
            elif lam < 1e-8:
                raise NoConvergence(f"Inversion of z={z} left the map domain", z=str(z))
            lam *= 0.5
        stalled = abs(w_new - w) <= 1e-15 * abs(w)
        w, res, dz = w_new, res_new, dz_new
        converged = abs(res) <= tol or (stalled and abs(res) <= 1e-12 * (1.0 + abs(z)))

    if not converged:
        raise NoConvergence(
            f"Inversion of z={z} did not converge in {max_iter} iterations",
            z=str(z),
            residual=float(abs(res)),
        )
    # polish
    w_pol = w - res / dz
    if abs(w_pol) > floor:
        z_pol, _ = eval_map(cmap, w_pol)
        if abs(z_pol - z) <= abs(res):
            w = w_pol

    if strict and abs(w) < 1.0 - INSIDE_TOL:
        raise InsideCluster(f"Point z={z} lies inside the cluster (|w|={abs(w):.6g})",
                            w_abs=float(abs(w)))
    return w


def boundary_grid(cmap: ConformalMap, m: int) -> BoundaryGrid:
    """Sample the map on m uniform nodes of the unit circle.

    Raises:
        ValueError: If m is not a power of two
    """
    if m < 8 or m & (m - 1):
        raise ValueError(f"Grid size must be a power of two >= 8, got {m}")
    phis = 2 * np.pi * np.arange(m) / m
    nodes = np.exp(1j * phis)
    z_vals, dz_vals = eval_map(cmap, nodes)
    return BoundaryGrid(
        m=m,
        phis=phis,
        nodes=nodes,
        z_vals=z_vals,
        dz_vals=dz_vals,
        wprime_abs=1.0 / np.abs(dz_vals),
    )


def schwarz_on_grid(cmap: ConformalMap, grid: BoundaryGrid) -> np.ndarray:
    """Schwarz function S = conj(z)(1/w) on the grid nodes, from conjugated coefficients."""
    w = grid.nodes
    s = cmap.radius / w + np.conj(cmap.center)
    for term in cmap.terms:
        s = s + np.conj(term.coeff) * np.log1p(-np.conj(term.sing) * w)
    return s


def schwarz_residual(cmap: ConformalMap, grid: BoundaryGrid) -> float:
    return float(np.max(np.abs(schwarz_on_grid(cmap, grid) - np.conj(grid.z_vals))))


def area_closed_form(cmap: ConformalMap) -> float:
    """Area enclosed by the boundary, from the map parameters."""
    if not cmap.terms:
        return float(np.pi * cmap.radius**2)
    c = cmap.coeffs
    a = cmap.sings
    cross = np.log1p(-np.outer(a, np.conj(a)))
    total = cmap.radius**2 + np.einsum("m,l,ml->", c, np.conj(c), cross)
    return float(np.pi * total.real)


def area_quadrature(grid: BoundaryGrid) -> float:
    return float(0.5 * np.sum(np.imag(np.conj(grid.z_vals) * grid.dz_dphi)) * grid.dphi)


def singularity_targets(cmap: ConformalMap, sings: Optional[np.ndarray] = None) -> np.ndarray:
    """Values z(1/conj(a)) at the reflected singularities."""
    a = cmap.sings if sings is None else np.asarray(sings, dtype=complex)
    if a.size == 0:
        return np.zeros(0, dtype=complex)
    c = cmap.coeffs
    abar = np.conj(a)
    cross = np.log1p(-np.outer(abar, cmap.sings))  # [j, m] = log(1 - a_m conj(a_j))
    return cmap.radius / abar + cmap.center + cross @ c


def translation_invariant(cmap: ConformalMap) -> complex:
    """Constant term of the Schwarz function at infinity."""
    if not cmap.terms:
        return complex(np.conj(cmap.center))
    logs = np.conj(cmap.log_sings()) - np.log(cmap.radius)
    return complex(np.conj(cmap.center) + np.sum(np.conj(cmap.coeffs) * logs))


def continue_branches(previous: ConformalMap, sings: np.ndarray) -> Tuple[int, ...]:
    """Winding offsets for moved singularities that keep log(sing) continuous.

    The first ``len(previous.terms)`` entries of ``sings`` continue the previous terms;
    any further entries are new and start at offset 0.
    """
    sings = np.asarray(sings, dtype=complex)
    n_old = len(previous.terms)
    offsets = [0] * len(sings)
    if n_old:
        old_args = np.angle(previous.sings) + 2 * np.pi * np.array(previous.branch_offsets)
        new_args = np.angle(sings[:n_old])
        turns = np.round((old_args - new_args) / (2 * np.pi)).astype(int)
        offsets[:n_old] = [int(k) for k in turns]
    return tuple(offsets)


def with_parameters(
    cmap: ConformalMap, radius: float, center: complex, coeffs: np.ndarray, sings: np.ndarray
) -> ConformalMap:
    """Rebuild a map with new parameters, continuing the branch bookkeeping."""
    terms = tuple(LogTerm(complex(c), complex(a)) for c, a in zip(coeffs, sings))
    offsets = continue_branches(cmap, sings)
    return replace(cmap, radius=float(radius), center=complex(center), terms=terms,
                   branch_offsets=offsets)


def winding_about_origin(grid: BoundaryGrid) -> float:
    phase = np.unwrap(np.angle(np.append(grid.z_vals, grid.z_vals[0])))
    return float((phase[-1] - phase[0]) / (2 * np.pi))


def harmonic_moments(cmap: ConformalMap, grid: BoundaryGrid, kmax: int) -> MomentVector:
    """Area, exterior and interior harmonic moments by boundary quadrature.

    Args:
        cmap: Conformal map (used for the consistency check of the grid)
        grid: Boundary grid of the same map
        kmax: Highest moment index

    Returns:
        MomentVector with t0 = area / pi

    Raises:
        DomainContainsOrigin: If the origin is not enclosed by the boundary
        ValueError: If kmax < 1 or the grid does not belong to the map
    """
    if kmax < 1:
        raise ValueError("kmax must be at least 1")
    if not np.isclose(grid.z_vals[0], eval_map(cmap, 1.0 + 0j)[0], rtol=0, atol=1e-12):
        raise ValueError("Boundary grid does not belong to the given map")
    winding = winding_about_origin(grid)
    if abs(winding - 1.0) > 0.5 or np.min(np.abs(grid.z_vals)) == 0:
        raise DomainContainsOrigin(
            f"Origin is not inside the cluster (winding number {winding:.3f})",
            winding=winding,
        )
    z = grid.z_vals
    zbar_dz = np.conj(z) * grid.dz_dphi * grid.dphi / (2j * np.pi)
    t0 = float(np.sum(zbar_dz).real)
    ks = np.arange(1, kmax + 1)
    tk = np.array([np.sum(zbar_dz * z ** (-k)) / k for k in ks], dtype=complex)
    vk = np.array([np.sum(zbar_dz * z**k) for k in ks], dtype=complex)
    return MomentVector(t0=t0, tk=tk, vk=vk)
