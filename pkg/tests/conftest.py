import numpy as np
import pytest

from ihsim.rng import stream


@pytest.fixture
def rng(request):
    """Fresh generator keyed on the test name so tests stay independent."""
    return stream(20240601, request.node.name)


def complex_normal(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    s = np.sqrt(var / 2.0)
    return s * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
