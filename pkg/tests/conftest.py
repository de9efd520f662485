import numpy as np
import pytest

from invariant_sta import bundled_scenario, parse_scenario
from invariant_sta.algebra import builtin_algebra


@pytest.fixture(scope="session")
def su2():
    return builtin_algebra("su2")


@pytest.fixture(scope="session")
def u3s3():
    return builtin_algebra("u3s3")


@pytest.fixture(scope="session")
def specs():
    return {name: parse_scenario(bundled_scenario(name))
            for name in ("fig1", "fig2", "fig3", "fig3_reverse")}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
