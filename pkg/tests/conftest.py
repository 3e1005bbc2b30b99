import hypothesis
import numpy as np
import pytest

hypothesis.settings.register_profile("default", max_examples=50, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.load_profile("default")

np.seterr(all="raise", under="ignore")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
