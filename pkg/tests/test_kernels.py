import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from greedy_mmd.kernels import KernelSpec, reduced_eval
from greedy_mmd.targets import Empirical, GaussianMixture

coords = st.floats(-5, 5, allow_nan=False)
point2 = arrays(np.float64, 2, elements=coords)
FAMILIES = ["matern32_product", "gaussian_rbf", "distance"]


def test_identity_values():
    x = np.array([0.3, -1.2])
    assert KernelSpec("gaussian_rbf", 1.0).eval(x, x) == 1.0
    for theta in (0.1, 1.0, 37.0):
        assert KernelSpec("matern32_product", theta).eval(x, x) == 1.0


def test_matern_unit_distance():
    k = KernelSpec("matern32_product", 1.0 / math.sqrt(3.0))
    assert k.eval([0.0], [1.0]) == pytest.approx(2.0 * math.exp(-1.0), abs=1e-15)
    assert k.eval([0.0], [1.0]) == pytest.approx(0.735759, abs=1e-6)


def test_matern_is_a_product_over_coordinates():
    k = KernelSpec("matern32_product", 2.0)
    lam = math.sqrt(3.0) * 2.0
    x, y = np.array([0.1, 0.7, -0.2]), np.array([0.4, 0.0, 0.5])
    expected = 1.0
    for a, b in zip(x, y):
        t = lam * abs(a - b)
        expected *= (1.0 + t) * math.exp(-t)
    assert k(x, y) == pytest.approx(expected, rel=1e-14)


def test_rbf_and_distance_values():
    x, y = np.array([1.0, 2.0]), np.array([-0.5, 0.0])
    d2 = 1.5**2 + 2.0**2
    assert KernelSpec("gaussian_rbf", 0.7).eval(x, y) == pytest.approx(math.exp(-0.7 * d2), rel=1e-15)
    assert KernelSpec("distance").eval(x, y) == pytest.approx(-math.sqrt(d2), rel=1e-15)


@pytest.mark.parametrize("family", FAMILIES)
def test_symmetry_exact_on_random_pairs(family, rng):
    k = KernelSpec(family, 3.0)
    X, Y = rng.normal(size=(1000, 3)), rng.normal(size=(1000, 3))
    forward = np.array([k.eval(x, y) for x, y in zip(X, Y)])
    backward = np.array([k.eval(y, x) for x, y in zip(X, Y)])
    assert np.array_equal(forward, backward)
    G = k.gram(X[:50], Y[:40])
    assert np.array_equal(G, k.gram(Y[:40], X[:50]).T)


@given(point2, point2, st.sampled_from(FAMILIES))
def test_gram_column_eval_agree(x, y, family):
    k = KernelSpec(family, 1.3)
    assert k.gram(x[None], y[None])[0, 0] == k.eval(x, y) == k.column(x[None], y)[0]


@pytest.mark.parametrize("family", ["matern32_product", "gaussian_rbf"])
def test_unit_diagonal_and_positivity(family, rng):
    k = KernelSpec(family, 2.0)
    X = rng.normal(size=(200, 2))
    assert np.all(k.diag(X) == 1.0)
    assert np.all(np.diag(k.gram(X, X)) == 1.0)
    assert np.all(k.gram(X, X) >= 0.0)
    assert k.is_positive and k.is_spd and k.kbar == 1.0


@pytest.mark.parametrize("family", ["matern32_product", "gaussian_rbf"])
def test_gram_cholesky_succeeds(family, rng):
    k = KernelSpec(family, 1.0)
    for _ in range(10):
        X = rng.random((8, 2))
        np.linalg.cholesky(k.gram(X, X))


def test_distance_kernel_flags():
    k = KernelSpec("distance")
    assert not k.is_spd and not k.is_positive
    with pytest.raises(ValueError, match="strictly positive definite"):
        k.require_spd()


def test_reduced_kernel_at_gaussian_mean():
    target = GaussianMixture([1.0], [[0.0, 0.0]], [0.5])
    k = KernelSpec("gaussian_rbf", 1.0)
    x = np.zeros(2)
    assert reduced_eval(k, target, x, x) == pytest.approx(1.0 - 2.0 * (2.0 / 3.0) + 0.5, abs=1e-15)
    assert reduced_eval(k, target, x, x) == pytest.approx(1.0 / 6.0, abs=1e-15)


def test_reduced_distance_kernel_brute_force(rng):
    C = rng.random((7, 2))
    target = Empirical(C)
    k = KernelSpec("distance")
    x, y = rng.random(2), rng.random(2)
    px = -np.mean([np.linalg.norm(x - c) for c in C])
    py = -np.mean([np.linalg.norm(y - c) for c in C])
    e = -np.mean([np.linalg.norm(a - b) for a in C for b in C])
    assert reduced_eval(k, target, x, y) == pytest.approx(-np.linalg.norm(x - y) - px - py + e, abs=1e-14)


def test_reduced_kernel_equals_kernel_on_zero_sum_weights(rng):
    target = GaussianMixture([0.5, 0.5], [[0.0, 0.0], [1.0, 1.0]], [0.4, 0.7])
    k = KernelSpec("gaussian_rbf", 1.5)
    for _ in range(20):
        X = rng.normal(size=(6, 2))
        u = rng.normal(size=6)
        u -= u.mean()
        G = k.gram(X, X)
        p = target.potential(k, X)
        Kmu = G - p[:, None] - p[None, :] + target.energy(k)
        assert u @ Kmu @ u == pytest.approx(u @ G @ u, rel=1e-10)
        assert u @ G @ u > 0


def test_errors():
    with pytest.raises(ValueError, match="unknown kernel family"):
        KernelSpec("laplace")
    with pytest.raises(ValueError, match="theta"):
        KernelSpec("gaussian_rbf", 0.0)
    with pytest.raises(ValueError, match="dimension mismatch"):
        KernelSpec("gaussian_rbf").eval([0.0, 1.0], [0.0])
    with pytest.raises(ValueError, match="dimension mismatch"):
        KernelSpec("gaussian_rbf").gram(np.zeros((2, 2)), np.zeros((2, 3)))
