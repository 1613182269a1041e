import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from spacelike.drift import IdentityHarness, interior_samples
from spacelike.shrinkers import standard_suite

SUITE_SAMPLES = 50


@pytest.fixture(scope="session")
def suite():
    return standard_suite(1e-11)


@pytest.fixture(scope="session")
def harnesses(suite):
    rng = np.random.default_rng(0)
    out = {}
    for name, sh in suite.items():
        X = interior_samples(sh.graph, SUITE_SAMPLES, rng)
        out[name] = IdentityHarness(sh.graph, X, name=name)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
