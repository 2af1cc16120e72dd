import numpy as np
import pytest

from radmilne import BoundaryData, Grid, solve_bounded_milne


@pytest.fixture(scope="session")
def demo20():
    """Demo run: T_b=1, psi_b=1/2, B=20, default resolution."""
    grid = Grid.uniform(20.0, nx=401, nmu=16)
    bd = BoundaryData.make(grid, 1.0, 0.5)
    return grid, bd, solve_bounded_milne(grid, bd)


@pytest.fixture(scope="session")
def demo20_fine():
    grid = Grid.uniform(20.0, nx=801, nmu=16)
    bd = BoundaryData.make(grid, 1.0, 0.5)
    return grid, bd, solve_bounded_milne(grid, bd)


@pytest.fixture(scope="session")
def demo10():
    grid = Grid.uniform(10.0, nx=401, nmu=16)
    bd = BoundaryData.make(grid, 1.0, 0.5)
    return grid, bd, solve_bounded_milne(grid, bd)


@pytest.fixture(scope="session")
def wellprepared10():
    grid = Grid.uniform(10.0, nx=401, nmu=16)
    bd = BoundaryData.make(grid, 1.0, 1.0)
    return grid, bd, solve_bounded_milne(grid, bd)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240612)
