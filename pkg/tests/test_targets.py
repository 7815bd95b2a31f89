import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from greedy_mmd.kernels import KernelSpec
from greedy_mmd.targets import (
    Empirical,
    GaussianMixture,
    UniformBox,
    UnsupportedPairingError,
    make_target,
    matern32_uniform_energy_1d,
)

SINGLE = dict(weights=[1.0], means=[[0.0, 0.0]], sds=[0.5])
RBF1 = KernelSpec("gaussian_rbf", 1.0)


def matern_1d(u, lam):
    return (1.0 + lam * abs(u)) * math.exp(-lam * abs(u))


def quad_potential(x, lower, upper, lam):
    """Product of adaptive 1-d quadratures, split at the kink."""
    val = 1.0
    for xi, a, b in zip(x, lower, upper):
        edges = [a, xi, b] if a < xi < b else [a, b]
        s = sum(integrate.quad(lambda t: matern_1d(t - xi, lam), lo, hi, epsabs=1e-14, epsrel=1e-13)[0]
                for lo, hi in zip(edges, edges[1:]))
        val *= s / (b - a)
    return val


def test_single_gaussian_closed_forms():
    t = GaussianMixture(**SINGLE)
    assert t.potential(RBF1, [[0.0, 0.0]])[0] == pytest.approx(2.0 / 3.0, abs=1e-15)
    assert t.energy(RBF1) == pytest.approx(0.5, abs=1e-15)


def test_single_gaussian_monte_carlo(rng):
    t = GaussianMixture(**SINGLE)
    X = t.sample(400_000, rng)
    for x in ([0.0, 0.0], [0.4, -0.3], [1.5, 1.0]):
        vals = RBF1.column(X, np.array(x))
        se = vals.std(ddof=1) / math.sqrt(X.shape[0])
        assert abs(vals.mean() - t.potential(RBF1, [x])[0]) <= 3 * se
    pv = t.potential(RBF1, X)
    assert abs(pv.mean() - t.energy(RBF1)) <= 3 * pv.std(ddof=1) / math.sqrt(X.shape[0])


def test_matern_uniform_corner_value():
    k = KernelSpec("matern32_product", 1.0 / math.sqrt(3.0))
    val = UniformBox([0.0], [1.0]).potential(k, [[0.0]])[0]
    assert val == pytest.approx(2.0 - 3.0 / math.e, abs=1e-14)
    assert val == pytest.approx(0.896362, abs=1e-6)


def test_matern_uniform_potential_vs_quadrature(rng):
    box = UniformBox([-0.5, 0.0, 1.0], [0.5, 2.0, 1.3])
    k = KernelSpec("matern32_product", 3.0)
    lam = math.sqrt(3.0) * 3.0
    X = rng.uniform(-1.0, 2.5, (25, 3))
    got = box.potential(k, X)
    for x, g in zip(X, got):
        assert g == pytest.approx(quad_potential(x, box.lower, box.upper, lam), abs=1e-10)


def test_matern_uniform_energy_vs_double_quadrature():
    for lam, length in ((1.0, 1.0), (5.0, 0.7), (17.32, 1.0)):
        def inner(x):
            return sum(integrate.quad(lambda y: matern_1d(x - y, lam), lo, hi, epsabs=1e-14)[0]
                       for lo, hi in ((0.0, x), (x, length)))
        ref, _ = integrate.quad(inner, 0.0, length, epsabs=1e-13, epsrel=1e-13)
        assert matern32_uniform_energy_1d(length, lam) == pytest.approx(ref / length**2, abs=1e-10)
    assert matern32_uniform_energy_1d(1.0, 1.0) == pytest.approx(0.943035529, abs=1e-9)


@given(st.floats(1e-6, 3.0))
def test_energy_series_branch_matches_high_precision(t):
    mpmath.mp.dps = 50
    tt = mpmath.mpf(t)
    exact = 2 * (2 * tt - 3 + (tt + 3) * mpmath.exp(-tt)) / tt**2
    assert matern32_uniform_energy_1d(1.0, t) == pytest.approx(float(exact), abs=1e-14)


def test_box_energy_is_product_and_mean_potential(rng):
    box = UniformBox([0.0, 0.0], [1.0, 2.0])
    k = KernelSpec("matern32_product", 2.0)
    lam = math.sqrt(3.0) * 2.0
    assert box.energy(k) == pytest.approx(
        matern32_uniform_energy_1d(1.0, lam) * matern32_uniform_energy_1d(2.0, lam), rel=1e-14)
    pv = box.potential(k, box.sample(200_000, rng))
    assert abs(pv.mean() - box.energy(k)) <= 3 * pv.std(ddof=1) / math.sqrt(pv.size)


def test_duplicate_components_collapse():
    one = GaussianMixture([1.0], [[0.3, -0.2]], [0.6])
    two = GaussianMixture([0.5, 0.5], [[0.3, -0.2], [0.3, -0.2]], [0.6, 0.6])
    k = KernelSpec("gaussian_rbf", 0.8)
    X = np.array([[0.0, 0.0], [1.0, 2.0]])
    assert np.allclose(one.potential(k, X), two.potential(k, X), rtol=1e-15)
    assert one.energy(k) == pytest.approx(two.energy(k), rel=1e-15)


def test_empirical_single_point():
    x = np.array([[0.2, 0.9]])
    t = Empirical(x)
    for fam in ("gaussian_rbf", "matern32_product"):
        k = KernelSpec(fam, 2.0)
        assert t.potential(k, x)[0] == 1.0
        assert t.energy(k) == 1.0


def test_empirical_matches_direct_average(rng):
    ref = rng.random((30, 2))
    t = Empirical(ref)
    k = KernelSpec("distance")
    X = rng.random((5, 2))
    direct = np.array([-np.mean(np.linalg.norm(ref - x, axis=1)) for x in X])
    assert np.allclose(t.potential(k, X), direct, atol=1e-14)
    # a second call is served from the cache and agrees
    assert np.array_equal(t.potential(k, X), t.potential(k, X))
    e = -np.mean(np.linalg.norm(ref[:, None] - ref[None], axis=-1))
    assert t.energy(k) == pytest.approx(e, abs=1e-14)


def test_moments():
    box = UniformBox([0.0], [1.0])
    m = box.moments(KernelSpec("matern32_product", 1.0))
    assert m.tau_half == 1.0 and m.tau_one == 1.0
    assert m.energy <= m.tau_half**2
    mix = GaussianMixture(**SINGLE).moments(RBF1)
    assert mix.tau_one == 1.0 and mix.energy <= mix.tau_half**2
    emp = Empirical(np.random.default_rng(0).random((10, 2)))
    assert emp.moments(KernelSpec("distance")).tau_one == 0.0
    assert emp.moments(RBF1).tau_one == 1.0


def test_unsupported_pairings_name_both_sides():
    with pytest.raises(UnsupportedPairingError, match="uniform_box.*gaussian_rbf"):
        UniformBox([0.0], [1.0]).potential(RBF1, [[0.5]])
    with pytest.raises(UnsupportedPairingError, match="gaussian_mixture.*matern32_product"):
        GaussianMixture(**SINGLE).energy(KernelSpec("matern32_product", 1.0))


def test_validation():
    with pytest.raises(ValueError, match="sum to one"):
        GaussianMixture([0.5, 0.6], [[0.0], [1.0]], [1.0, 1.0])
    with pytest.raises(ValueError, match="positive"):
        GaussianMixture([1.0], [[0.0]], [0.0])
    with pytest.raises(ValueError, match="upper must exceed"):
        UniformBox([0.0, 1.0], [1.0, 1.0])
    with pytest.raises(ValueError, match="at least one"):
        Empirical(np.zeros((0, 2)))
    with pytest.raises(ValueError, match="not samplable"):
        Empirical(np.zeros((1, 2))).sample(3, np.random.default_rng(0))
    with pytest.raises(ValueError, match="unknown target"):
        make_target({"variant": "beta"})


def test_mixture_sampling_component_frequencies(rng):
    t = GaussianMixture([0.2, 0.8], [[-10.0], [10.0]], [0.1, 0.1])
    X = t.sample(100_000, rng)
    frac = np.mean(X[:, 0] > 0)
    assert abs(frac - 0.8) <= 3 * math.sqrt(0.16 / 100_000)


def test_make_target_round_trip():
    t = make_target({"variant": "gaussian_mixture", "weights": [1.0], "means": [[0, 0]], "sds": [0.5]})
    assert t.energy(RBF1) == pytest.approx(0.5)
    b = make_target({"variant": "uniform_box", "lower": [0], "upper": [2]})
    assert b.to_dict() == {"variant": "uniform_box", "lower": [0.0], "upper": [2.0]}
