"""Verification suite: pressure variations, double-point flow and exponential martingales."""

from slg_lab.martingale.double import (
    DoublePoint,
    DriverSet,
    MartingaleSample,
    driver_set,
    evolve_double,
    find_S_points,
    h_function,
    in_S,
    kernel_sum,
    martingale_M,
    noise_kernel_sum,
    predicted_drift,
)
from slg_lab.martingale.ensemble import (
    CHECKS,
    EnsembleStats,
    StatRow,
    Summary,
    choose_anchor,
    ensemble_verify,
    summarize,
)
from slg_lab.martingale.pressure import (
    elementary_deformation,
    green_to_source,
    pressure,
    pressure_variation,
    pressure_variation_quadrature,
)

__all__ = [
    "CHECKS",
    "DoublePoint",
    "DriverSet",
    "EnsembleStats",
    "MartingaleSample",
    "StatRow",
    "Summary",
    "choose_anchor",
    "driver_set",
    "elementary_deformation",
    "ensemble_verify",
    "evolve_double",
    "find_S_points",
    "green_to_source",
    "h_function",
    "in_S",
    "kernel_sum",
    "martingale_M",
    "noise_kernel_sum",
    "predicted_drift",
    "pressure",
    "pressure_variation",
    "pressure_variation_quadrature",
    "summarize",
]
