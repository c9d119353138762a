import numpy as np
import pytest

from hicrp.interaction import InteractionSet


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def corpus():
    """Six author lists over five authors; the reverse order is used in PART checks."""
    return InteractionSet.from_tokens([
        ("A1", "A2"), ("A3", "A4"), ("A4", "A3"), ("A4", "A1"), ("A2", "A5", "A4"),
        ("A5", "A2", "A4", "A3"),
    ])
