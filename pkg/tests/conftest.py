import pytest
from helpers import ZeroRng


@pytest.fixture
def zero_rng():
    return ZeroRng()
