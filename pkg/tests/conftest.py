import numpy as np
import pytest

from tailcouple.config import get_settings
from tailcouple.services.sample_core import build_sample


def quantile_grid(gamma: float, n: int):
    """Deterministic Pareto(γ) quantile grid (1 - j/(n+1))^{-γ}, j = 1..n."""
    j = np.arange(1, n + 1)
    return build_sample((1.0 - j / (n + 1)) ** (-gamma), source=f"grid gamma={gamma} n={n}")


@pytest.fixture(autouse=True)
def fresh_settings():
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def small_sample():
    return build_sample([1.0, 2.0, 3.0, 4.0])


@pytest.fixture
def grid_075():
    return quantile_grid(0.75, 1000)


@pytest.fixture
def grid_06():
    return quantile_grid(0.6, 10_000)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
