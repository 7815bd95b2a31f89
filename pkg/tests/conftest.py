import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from greedy_mmd.candidates import CandidateSet, halton_points
from greedy_mmd.kernels import KernelSpec
from greedy_mmd.targets import GaussianMixture, UniformBox

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def matern_setup():
    kernel = KernelSpec("matern32_product", 10.0)
    target = UniformBox([0.0, 0.0], [1.0, 1.0])
    cs = CandidateSet(halton_points(512, [0, 0], [1, 1]), kernel, target)
    return kernel, target, cs


@pytest.fixture(scope="session")
def mixture_setup():
    target = GaussianMixture([2 / 7, 2 / 7, 3 / 7], [[-1, 1], [1, -1], [1, 1]], [0.5, 0.5, 0.5])
    kernel = KernelSpec("gaussian_rbf", 2.0)
    pts = target.sample(400, np.random.default_rng(1))
    return kernel, target, CandidateSet(pts, kernel, target)
