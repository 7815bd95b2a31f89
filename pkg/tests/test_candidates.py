import math
import warnings

import numpy as np
import pytest

from greedy_mmd.candidates import CandidateSet, CandidateSource, build, halton_points, resample
from greedy_mmd.kernels import KernelSpec
from greedy_mmd.linalg import certified_mc2
from greedy_mmd.targets import GaussianMixture, UniformBox

RBF1 = KernelSpec("gaussian_rbf", 1.0)
SINGLE = GaussianMixture([1.0], [[0.0, 0.0]], [0.5])


def radical_inverse(i, base):
    out, f = 0.0, 1.0 / base
    while i > 0:
        i, digit = divmod(i, base)
        out += digit * f
        f /= base
    return out


def test_file_mode(tmp_path):
    path = tmp_path / "pts.csv"
    path.write_text("# x,y\n0,0\n1,1\n")
    src = CandidateSource("file", path=str(path))
    cs = build(src, None, SINGLE, RBF1)
    assert np.array_equal(cs.points, [[0.0, 0.0], [1.0, 1.0]])
    assert np.array_equal(cs.diag, [1.0, 1.0])
    assert cs.kbar_c == 1.0


def test_file_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        build(CandidateSource("file", path=str(tmp_path / "nope.csv")), None, SINGLE, RBF1)
    bad = tmp_path / "bad.csv"
    bad.write_text("0,0\n1\n")
    with pytest.raises(ValueError):
        build(CandidateSource("file", path=str(bad)), None, SINGLE, RBF1)
    three = tmp_path / "three.csv"
    three.write_text("0,0,0\n")
    with pytest.raises(ValueError, match="dimension"):
        build(CandidateSource("file", path=str(three)), None, SINGLE, RBF1)


def test_duplicates_removed_with_warning():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 0.0], [2.0, 2.0], [1.0, 0.0]])
    with pytest.warns(UserWarning, match="dropped 2 duplicate"):
        cs = CandidateSet(pts, RBF1, SINGLE)
    assert np.array_equal(cs.points, [[0.0, 0.0], [1.0, 0.0], [2.0, 2.0]])


def test_no_warning_for_distinct_points():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        CandidateSet(np.array([[0.0, 0.0], [0.0, 1e-300]]), RBF1, SINGLE)


@pytest.mark.parametrize("offset", [0, 1, 5, 17, 1000])
def test_halton_matches_radical_inverse(offset):
    pts = halton_points(4, [0, 0], [1, 1], offset)
    for i, p in enumerate(pts):
        assert p[0] == pytest.approx(radical_inverse(offset + i, 2), abs=1e-15)
        assert p[1] == pytest.approx(radical_inverse(offset + i, 3), abs=1e-15)


def test_halton_box_scaling():
    pts = halton_points(3, [-1.0, 2.0], [1.0, 4.0], 1)
    assert pts[0] == pytest.approx([-1.0 + 2 * 0.5, 2.0 + 2 * (1 / 3)])


def test_iid_target_mean_potential_equals_energy():
    cs = build(CandidateSource("iid_target", seed=3), 100_000, SINGLE, RBF1)
    se = cs.pot.std(ddof=1) / math.sqrt(len(cs))
    assert abs(cs.pot.mean() - 0.5) <= 3 * se


def test_uniform_rng_respects_box():
    src = CandidateSource("uniform_rng", seed=1, box=([2.0, -1.0], [3.0, 0.0]))
    cs = build(src, 500, UniformBox([2.0, -1.0], [3.0, 0.0]), KernelSpec("matern32_product", 1.0))
    assert np.all((cs.points >= [2.0, -1.0]) & (cs.points <= [3.0, 0.0]))


def test_resample_contract():
    src = CandidateSource("iid_target", seed=9, resample_each_iteration=True)
    a = resample(src, 4, 50, SINGLE, RBF1)
    b = resample(src, 4, 50, SINGLE, RBF1)
    c = resample(src, 5, 50, SINGLE, RBF1)
    assert np.array_equal(a.points, b.points)
    assert not np.any(np.all(a.points[:, None] == c.points[None], axis=-1))
    union = np.vstack([resample(src, k, 50, SINGLE, RBF1).points for k in range(1, 6)])
    assert union.shape[0] == 250
    with pytest.raises(ValueError):
        resample(CandidateSource("iid_target", seed=9), 1, 10, SINGLE, RBF1)


def test_source_validation():
    with pytest.raises(ValueError, match="unknown candidate mode"):
        CandidateSource("sobol")
    with pytest.raises(ValueError, match="requires mode 'iid_target'"):
        CandidateSource("halton", box=([0], [1]), resample_each_iteration=True)
    with pytest.raises(ValueError, match="needs a box"):
        CandidateSource("halton")
    with pytest.raises(ValueError, match="at least 1"):
        build(CandidateSource("iid_target"), 0, SINGLE, RBF1)


def test_reduced_diagonal_bound(rng):
    target = GaussianMixture([0.3, 0.7], [[0, 0], [2, 1]], [0.5, 1.0])
    for theta in (0.2, 1.0, 5.0):
        k = KernelSpec("gaussian_rbf", theta)
        cs = CandidateSet(rng.normal(size=(200, 2)) * 3, k, target)
        tau = target.moments(k).tau_half
        assert cs.kmu_bar_c <= (math.sqrt(cs.kbar_c) + tau) ** 2
        assert np.allclose(cs.reduced_diag(), cs.diag - 2 * cs.pot + cs.energy)


def test_expected_mc2_bound_for_iid_candidates():
    C = 256
    uppers = []
    for seed in range(50):
        cs = build(CandidateSource("iid_target", seed=seed), C, SINGLE, RBF1)
        uppers.append(certified_mc2(cs, 1000)[1])
    uppers = np.array(uppers)
    rhs = (1.0 - 0.5) / C
    assert uppers.mean() <= rhs + 3 * uppers.std(ddof=1) / math.sqrt(len(uppers))
