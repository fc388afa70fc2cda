"""Test configuration and fixtures for slg_lab tests."""

import json

import numpy as np
import pytest

from slg_lab.cli.config import RunConfig
from slg_lab.conformal.mapping import ConformalMap, LogTerm
from slg_lab.drivers.sde import RateParams, initial_driver_state


@pytest.fixture
def identity_map() -> ConformalMap:
    """The unit circle, z(w) = w."""
    return ConformalMap.circle(1.0)


@pytest.fixture
def perturbed_map() -> ConformalMap:
    """A univalent map with one log term."""
    return ConformalMap(radius=1.0, terms=(LogTerm(0.05 + 0.02j, 0.5 + 0.1j),), center=0.01j)


@pytest.fixture
def random_map():
    """Factory for small univalent maps with k log terms."""

    def make(seed: int = 0, k: int = 3) -> ConformalMap:
        rng = np.random.default_rng(seed)
        coeffs = 0.02 * (rng.uniform(-1, 1, k) + 1j * rng.uniform(-1, 1, k))
        sings = rng.uniform(0.1, 0.6, k) * np.exp(2j * np.pi * rng.uniform(0, 1, k))
        return ConformalMap.from_arrays(rng.uniform(1.0, 2.0), coeffs, sings,
                                        center=0.05 * rng.standard_normal())

    return make


@pytest.fixture
def rate_params() -> RateParams:
    """Q = 1, nu = 0.04 and no drivers."""
    return RateParams(bigQ=1.0, nu=0.04)


@pytest.fixture
def one_driver_params() -> RateParams:
    return RateParams(bigQ=1.0, nu=0.04, alphas=(1.0,))


@pytest.fixture
def no_drivers(identity_map):
    return initial_driver_state(identity_map, [])


@pytest.fixture
def circle_config() -> RunConfig:
    """Deterministic growth of the unit circle on a coarse grid."""
    return RunConfig(mode="deterministic", steps=5, dt=0.01, snapshot_every=2, grid_m=64)


@pytest.fixture
def degenerate_check_config() -> RunConfig:
    """Stochastic config without drivers, for the N = 0 martingale checks."""
    return RunConfig(mode="stochastic", kappa=6.0, grid_m=64, dt=1e-3, n_paths=3,
                     check_steps=2, checks=["mean_M"])


@pytest.fixture
def config_file(tmp_path, circle_config):
    """The circle config written to disk."""
    path = tmp_path / "circle.json"
    path.write_text(json.dumps(circle_config.echo()), encoding="utf-8")
    return path


@pytest.fixture
def two_driver_check_config() -> RunConfig:
    """Two drivers on a perturbed circle with an S-point, for the driven checks."""
    return RunConfig(
        mode="stochastic", kappa=6.0, n_drivers=2, alphas=[1.0, 1.0],
        initial_drivers=[(0.4, 0.1), (-0.4, 0.2)],
        initial_perturbations=[{"coeff": (0.05, 0.0), "sing": (0.6, 0.0)}],
        grid_m=256, dt=1e-4, n_paths=2, check_steps=2, checks=["prop2_cov"],
    )
