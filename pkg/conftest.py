import numpy as np
import pytest


@pytest.fixture(autouse=True)
def _legacy_numpy_repr(doctest_namespace):
    # Doctests were written against numpy < 2 scalar reprs (``0.5642`` rather than ``np.float64(0.5642)``).
    np.set_printoptions(legacy="1.25")
    yield
