"""Stochastic driving layer."""

from slg_lab.drivers.noise import NoiseStream
from slg_lab.drivers.sde import (
    CONJUGATE_SLICE,
    DRIVER_MODES,
    EXACT,
    FRACTAL,
    LITERAL_DOUBLE,
    DriverState,
    RateParams,
    drift_g,
    drift_g_closed_form,
    initial_driver_state,
    log_z_n_product,
    step_drivers,
    time_change,
    z_n_product,
)

__all__ = [
    "CONJUGATE_SLICE",
    "DRIVER_MODES",
    "DriverState",
    "EXACT",
    "FRACTAL",
    "LITERAL_DOUBLE",
    "NoiseStream",
    "RateParams",
    "drift_g",
    "drift_g_closed_form",
    "initial_driver_state",
    "log_z_n_product",
    "step_drivers",
    "time_change",
    "z_n_product",
]
