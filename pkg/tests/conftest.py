# Shared fixtures: one small simulated dataset and one short (but real)
# posterior chain, reused across test modules to keep the suite fast.
# ==============================================================================
import numpy as np
import pytest

from tgarma.inference import MCMCConfig, PriorSpec, mh_sample
from tgarma.model import Family, ModelOrder, ModelSpec, ParamVector
from tgarma.simlab import simulate_tgarma
from tgarma.transform import Series

TRUE_GAMMA11 = ParamVector(
    beta0=0.7, phi=np.array([0.3]), theta=np.array([0.5]), u=2.0, lam=0.5
)


@pytest.fixture(scope="session")
def gamma11_series():
    """Simulated TGARMA(1,1) gamma series, n=300, fixed seed."""
    return simulate_tgarma(
        TRUE_GAMMA11, ModelOrder(1, 1), Family.GAMMA, n=300, seed=7
    )


@pytest.fixture(scope="session")
def gamma11_spec():
    return ModelSpec(family=Family.GAMMA, order=ModelOrder(1, 1))


@pytest.fixture(scope="session")
def gamma11_chain(gamma11_series, gamma11_spec):
    """A short real fit of the simulated series (kept small on purpose)."""
    config = MCMCConfig(draws=400, burn_in=300, thin=2, seed=11)
    return mh_sample(PriorSpec(), gamma11_series, gamma11_spec, config)


@pytest.fixture(scope="session")
def small_series():
    """Tiny deterministic positive series for exact-value oracles."""
    values = np.array([1.8, 2.4, 1.1, 3.0, 2.2, 1.6, 2.9, 2.0])
    return Series(values)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
