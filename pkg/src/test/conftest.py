import numpy as np
import pytest

from app.core.ndgrid import from_nested, from_slices

from .helpers import WORKED_SLICES


@pytest.fixture
def worked_volume():
    """Volumen 3x3x3 de cuatro niveles usado como ejemplo de referencia."""
    return from_slices(WORKED_SLICES, levels=4)


@pytest.fixture
def checkerboard():
    return from_nested([[0, 1], [1, 0]], levels=2)


@pytest.fixture
def constant_image():
    return from_nested(np.full((5, 6), 2), levels=4)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
