import math

import pytest

from qtorus.config import preset


@pytest.fixture(scope="session")
def duffing():
    return preset("duffing").hamiltonian()


@pytest.fixture(scope="session")
def henon_heiles():
    return preset("henon-heiles").hamiltonian()


E_INV = math.exp(-1)
