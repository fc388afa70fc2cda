"""Conformal maps of the fluid domain and their potential theory."""

from slg_lab.conformal.mapping import (
    BoundaryGrid,
    ConformalMap,
    LogTerm,
    MomentVector,
    area_closed_form,
    area_quadrature,
    boundary_grid,
    eval_map,
    harmonic_moments,
    invert_map,
    schwarz_residual,
    singularity_targets,
    translation_invariant,
)
from slg_lab.conformal.potential import (
    ANTIHOLOMORPHIC,
    HOLOMORPHIC,
    HerglotzTransform,
    green_function,
    green_to_infinity,
    green_w,
    hadamard_rate,
    harmonic_measure_on_grid,
    herglotz_transform,
    kernel_real_part,
    poisson_kernel,
    reflected_point,
)

__all__ = [
    "ANTIHOLOMORPHIC",
    "BoundaryGrid",
    "ConformalMap",
    "HOLOMORPHIC",
    "HerglotzTransform",
    "LogTerm",
    "MomentVector",
    "area_closed_form",
    "area_quadrature",
    "boundary_grid",
    "eval_map",
    "green_function",
    "green_to_infinity",
    "green_w",
    "hadamard_rate",
    "harmonic_measure_on_grid",
    "harmonic_moments",
    "herglotz_transform",
    "invert_map",
    "kernel_real_part",
    "poisson_kernel",
    "reflected_point",
    "schwarz_residual",
    "singularity_targets",
    "translation_invariant",
]
