import numpy as np
import pytest
from importlib import resources

from pfmix import free_energy as fe
from pfmix import models
from pfmix.config import build_all, load_config


def config_path(name: str):
    return resources.files("pfmix.data.configs").joinpath(name)


@pytest.fixture(scope="session")
def band_composition():
    """Calibrated mixture at the composition-unstable reference state."""
    cfg = load_config(config_path("band_composition.ini"))
    return build_all(cfg)


@pytest.fixture(scope="session")
def band_density():
    cfg = load_config(config_path("band_density.ini"))
    return build_all(cfg)


@pytest.fixture(scope="session")
def stable_dense():
    cfg = load_config(config_path("stable_dense.ini"))
    return build_all(cfg)


@pytest.fixture(scope="session")
def co2_decane():
    """CO2 / n-decane mixture at 300 K in SI units."""
    data = fe.load_species_data()
    return fe.PengRobinson(data["n-decane"], data["CO2"], temperature=300.0,
                           k12=0.1141)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def fd_gradient(f, x, rel=1e-6):
    """Central-difference gradient oracle with relative step."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        h = rel * max(1.0, abs(x[i]))
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def fd_hessian(grad, x, rel=1e-6):
    """Central differences of a gradient callable."""
    x = np.asarray(x, dtype=float)
    n = x.size
    H = np.zeros((n, n))
    for j in range(n):
        h = rel * max(1.0, abs(x[j]))
        e = np.zeros_like(x)
        e[j] = h
        H[:, j] = (grad(x + e) - grad(x - e)) / (2.0 * h)
    return 0.5 * (H + H.T)


def random_global_model(rng, stable=None):
    """Random globally-conserving binary model with PSD mobility/kappa."""
    A = rng.normal(size=(2, 2))
    M = A @ A.T + 0.2 * np.eye(2)
    K = np.diag(rng.uniform(1e-3, 1e-2, size=2))
    C = rng.normal(size=(2, 2))
    C = 0.5 * (C + C.T)
    if stable is True:
        C = C @ C.T + 0.5 * np.eye(2)
    q = fe.Quadratic(C)
    return models.CompressibleGlobal(
        free_energy=q, kappa=fe.GradientCoefficients(K), mobility=M,
        inv_Re_s=rng.uniform(0.1, 1.0), inv_Re_v=rng.uniform(0.1, 1.0))
