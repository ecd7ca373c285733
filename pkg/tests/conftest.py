import numpy as np
import pytest

from models import GMParams, Reaction, ReactionNetwork
from services.gm_service import GMService
from services.reaction_network_service import ReactionNetworkService
from services.spatial_service import SpatialGrid
from settings import Settings


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch):
    """Drop cached settings so every test reads the environment it sets up."""
    for var in (
        "RDE_MAX_CARLEMAN_DIM", "RDE_MAX_GRID_NODES", "RDE_MAX_SWEEP_CELLS",
        "RDE_MAX_DENSE_DIM", "RDE_BLOWUP_CAP", "RDE_LOG_LEVEL", "RDE_THREADS",
    ):
        monkeypatch.delenv(var, raising=False)
    Settings.reset()
    yield
    Settings.reset()


@pytest.fixture
def override_settings(monkeypatch):
    """Set RDE_* variables for one test, e.g. override_settings(RDE_MAX_CARLEMAN_DIM="10")."""

    def apply(**env):
        for key, value in env.items():
            monkeypatch.setenv(key, str(value))
        Settings.reset()
        return Settings.get()

    return apply


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240501)


@pytest.fixture
def stable_params() -> GMParams:
    """D1=1e-4, D2=D1/2, mu1=mu2=5, c1=b1=1, b2=0."""
    return GMService.stable_params()


@pytest.fixture
def small_grid() -> SpatialGrid:
    return SpatialGrid(d=1, n=4)


@pytest.fixture
def autocatalytic_network() -> ReactionNetwork:
    """All four cubic autocatalytic reactions on two species, unit rates."""
    return ReactionNetworkService.autocatalytic_network(2, 3)


@pytest.fixture
def conversion_network() -> ReactionNetwork:
    """y1 -> y2 at rate 2 and y2 -> y1 at rate 3, so F_1 has nonzero off-diagonals."""
    return ReactionNetwork(species=2, reactions=[
        Reaction(alpha=[1, 0], beta=[0, 1], rate=2.0),
        Reaction(alpha=[0, 1], beta=[1, 0], rate=3.0),
    ])
