import math

import numpy as np
import pytest

from fracmosco import generators as gen
from fracmosco.bernstein import BernsteinSymbol


@pytest.fixture(scope="session")
def dirichlet400():
    return gen.build_limit_generator(0.0, math.pi, "dirichlet", 400)


@pytest.fixture(scope="session")
def dirichlet200():
    return gen.build_limit_generator(0.0, math.pi, "dirichlet", 200)


@pytest.fixture(scope="session")
def stable_half():
    return BernsteinSymbol.stable(0.5)


@pytest.fixture(scope="session")
def gamma11():
    return BernsteinSymbol.gamma(1.0, 1.0)


def phi1(G):
    return G.eigenpairs.phi[:, 0].copy()


def sin_mode(G):
    # continuum first Dirichlet mode, normalized in L2(dx) on (0, pi)
    return np.sqrt(2.0 / np.pi) * np.sin(G.grid)
