"""Shared fixtures: seeded RNG, standard regions and a built defect."""
import numpy as np
import pytest

from src.backend.defect import build_defect, response
from src.backend.hamiltonian import Flux
from src.backend.lattice import ORIGIN, Region, site_b

PHI0 = 0.7
E0 = 3.5


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def ball40() -> Region:
    return Region.ball(ORIGIN, 40)


@pytest.fixture(scope="session")
def defect_sites():
    return ORIGIN, site_b(0, 0)


@pytest.fixture(scope="session")
def built_defect(ball40, defect_sites):
    """Two-site defect making E0 = 3.5 an eigenvalue at phi = 0.7 on Ball(v, 40)."""
    v, w = defect_sites
    flux = Flux.real(PHI0)
    u = response(flux, E0, v, ball40)
    return flux, u, build_defect(u, v, w)
