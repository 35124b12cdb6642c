import numpy as np
import pytest
from hypothesis import settings

from crforge.models import default_registry

settings.register_profile("crforge", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("crforge")


@pytest.fixture(scope="session")
def registry():
    return default_registry()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def maxabs(x) -> float:
    return float(np.max(np.abs(np.asarray(x)), initial=0.0))
