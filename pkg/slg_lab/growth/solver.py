"""Newton solution of the conserved-quantity system that advances the map."""

import logging
from dataclasses import dataclass

import numpy as np

from slg_lab.constants import NEWTON_MAX_HALVINGS
from slg_lab.errors import NewtonDiverged

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConservedSystem:
    """Unknowns r, b and the first ``n_free`` singularities; the rest are fixed.

    Equations (scaled):
        z(1/conj(a_j)) = targets[j] for every free singularity,
        r^2 + sum c_m conj(c_l) log(1 - a_m conj(a_l)) = area_target / pi,
        conj(b) + sum conj(c_m) (conj(log a_m) - log r) = tau_target,
    with log a_m continued from ``ref_args``.
    """

    coeffs: np.ndarray
    fixed_sings: np.ndarray
    targets: np.ndarray
    area_target: float
    tau_target: complex
    ref_args: np.ndarray
    ref_sings: np.ndarray

    @property
    def n_free(self) -> int:
        return self.targets.size

    def pack(self, radius: float, center: complex, free_sings: np.ndarray) -> np.ndarray:
        x = np.empty(3 + 2 * self.n_free)
        x[0] = radius
        x[1] = center.real
        x[2] = center.imag
        x[3::2] = free_sings.real
        x[4::2] = free_sings.imag
        return x

    def unpack(self, x: np.ndarray):
        return x[0], complex(x[1], x[2]), x[3::2] + 1j * x[4::2]

    def all_sings(self, free_sings: np.ndarray) -> np.ndarray:
        return np.concatenate([free_sings, self.fixed_sings])

    def continuous_logs(self, sings: np.ndarray) -> np.ndarray:
        args = self.ref_args + np.angle(sings / self.ref_sings)
        return np.log(np.abs(sings)) + 1j * args

    def admissible(self, x: np.ndarray) -> bool:
        radius, _, free = self.unpack(x)
        return bool(radius > 0 and np.all(np.abs(free) < 1) and np.all(np.isfinite(x)))

    def residual(self, x: np.ndarray) -> np.ndarray:
        radius, center, free = self.unpack(x)
        a = self.all_sings(free)
        c = self.coeffs
        out = np.empty(3 + 2 * self.n_free)

        abar = np.conj(free)
        cross = np.log1p(-np.outer(abar, a))
        values = radius / abar + center + cross @ c
        e_targets = (values - self.targets) / (1.0 + np.abs(self.targets))
        out[3::2] = e_targets.real
        out[4::2] = e_targets.imag

        area_scale = 1.0 + abs(self.area_target / np.pi)
        gram = np.log1p(-np.outer(a, np.conj(a)))
        area = radius**2 + (c @ gram @ np.conj(c)).real
        out[0] = (area - self.area_target / np.pi) / area_scale

        logs = self.continuous_logs(a)
        tau = np.conj(center) + np.sum(np.conj(c) * (np.conj(logs) - np.log(radius)))
        e_tau = (tau - self.tau_target) / (1.0 + abs(self.tau_target))
        out[1] = e_tau.real
        out[2] = e_tau.imag
        return out

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        """Real Jacobian assembled from Wirtinger derivatives.

        For a variable a = u + i v: dE/du = dE/da + dE/dconj(a), dE/dv = i (dE/da - dE/dconj(a)).
        """
        radius, center, free = self.unpack(x)
        a = self.all_sings(free)
        c = self.coeffs
        J = self.n_free
        size = 3 + 2 * J
        jac = np.zeros((size, size))

        # target rows: complex derivatives w.r.t. r, b, a_k, conj(a_k)
        abar = np.conj(free)
        scale_t = 1.0 / (1.0 + np.abs(self.targets))
        d_r = (1.0 / abar) * scale_t
        denom = 1.0 - np.outer(abar, free)  # [j, k] = 1 - a_k conj(a_j)
        d_a = -(c[:J][None, :] * abar[:, None]) / denom * scale_t[:, None]
        mirror = ((c * a)[None, :] / (1.0 - np.outer(abar, a))).sum(axis=1)
        d_abar_diag = (-radius / abar**2 - mirror) * scale_t
        rows_re = slice(3, size, 2)
        rows_im = slice(4, size, 2)
        jac[rows_re, 0] = d_r.real
        jac[rows_im, 0] = d_r.imag
        # b enters holomorphically with unit derivative
        jac[rows_re, 1] = scale_t
        jac[rows_im, 1] = 0.0
        jac[rows_re, 2] = 0.0
        jac[rows_im, 2] = scale_t
        d_u = d_a.copy()
        d_v = 1j * d_a
        idx = np.arange(J)
        d_u[idx, idx] += d_abar_diag
        d_v[idx, idx] -= 1j * d_abar_diag
        jac[rows_re, 3::2] = d_u.real
        jac[rows_im, 3::2] = d_u.imag
        jac[rows_re, 4::2] = d_v.real
        jac[rows_im, 4::2] = d_v.imag

        # area row: real function with dF/da_k = D_k and dF/dconj(a_k) = conj(D_k)
        area_scale = 1.0 + abs(self.area_target / np.pi)
        jac[0, 0] = 2.0 * radius / area_scale
        if J:
            frac = -np.conj(a)[None, :] / (1.0 - np.outer(free, np.conj(a)))
            D = c[:J] * (frac @ np.conj(c))
            jac[0, 3::2] = 2.0 * D.real / area_scale
            jac[0, 4::2] = -2.0 * D.imag / area_scale

        # translation rows: antiholomorphic in b and in the singularities
        tau_scale = 1.0 / (1.0 + abs(self.tau_target))
        d_tau_r = -np.sum(np.conj(c)) / radius * tau_scale
        jac[1, 0] = d_tau_r.real
        jac[2, 0] = d_tau_r.imag
        jac[1, 1] = tau_scale
        jac[2, 2] = -tau_scale
        if J:
            d_tau_abar = np.conj(c[:J]) / abar * tau_scale
            jac[1, 3::2] = d_tau_abar.real
            jac[2, 3::2] = d_tau_abar.imag
            d_tau_v = -1j * d_tau_abar
            jac[1, 4::2] = d_tau_v.real
            jac[2, 4::2] = d_tau_v.imag
        return jac


@dataclass(frozen=True)
class SolveResult:
    radius: float
    center: complex
    free_sings: np.ndarray
    iterations: int
    residual: float


def solve_conserved(
    system: ConservedSystem,
    radius: float,
    center: complex,
    free_sings: np.ndarray,
    tol: float,
    max_iter: int,
) -> SolveResult:
    """Damped Newton iteration with step halving on residual increase.

    Raises:
        NewtonDiverged: If the scaled residual does not reach ``tol``
    """
    x = system.pack(radius, center, np.asarray(free_sings, dtype=complex))
    f = system.residual(x)
    norm = float(np.max(np.abs(f)))
    iterations = 0
    while norm > tol:
        if iterations >= max_iter:
            raise NewtonDiverged(
                f"Newton stopped at residual {norm:.3e} after {iterations} iterations",
                residual=norm,
                iterations=iterations,
            )
        iterations += 1
        try:
            dx = np.linalg.solve(system.jacobian(x), -f)
        except np.linalg.LinAlgError as e:
            raise NewtonDiverged(f"Singular Jacobian: {str(e)}", residual=norm,
                                 iterations=iterations)
        lam = 1.0
        accepted = False
        for _ in range(NEWTON_MAX_HALVINGS + 1):
            x_new = x + lam * dx
            if system.admissible(x_new):
                f_new = system.residual(x_new)
                norm_new = float(np.max(np.abs(f_new)))
                if norm_new < norm:
                    accepted = True
                    break
            lam *= 0.5
        if not accepted:
            if norm <= 100 * tol:
                logger.debug(f"Newton stagnated at residual {norm:.3e}; accepted")
                break
            raise NewtonDiverged(
                f"Newton line search failed at residual {norm:.3e}",
                residual=norm,
                iterations=iterations,
            )
        x, f, norm = x_new, f_new, norm_new
    r, b, free = system.unpack(x)
    return SolveResult(radius=float(r), center=b, free_sings=free, iterations=iterations,
                       residual=norm)
