import numpy as np
import pytest

from thinfilm.grid import Grid


@pytest.fixture
def unit_grid():
    return Grid(1.0, 128)


@pytest.fixture
def cosine_field(unit_grid):
    return unit_grid.sample(lambda x: 1.0 + 0.5 * np.cos(2.0 * np.pi * x))
