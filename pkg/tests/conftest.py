import numpy as np
import pytest

from socialmfg import (
    Example1Cost,
    Example1VariantCost,
    Example2Cost,
    Example2VariantCost,
)


def example_models():
    return [Example1Cost(), Example1VariantCost(), Example2Cost(), Example2VariantCost()]


@pytest.fixture(params=example_models(), ids=lambda m: m.name)
def example_model(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
