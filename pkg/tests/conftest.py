import numpy as np
import pytest

from camdyn.body import build_body


@pytest.fixture(scope="session")
def body():
    return build_body()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_pose(rng, angle=np.pi):
    q = rng.uniform(-angle, angle, 75)
    q[0:3] = rng.normal(size=3)
    return q
