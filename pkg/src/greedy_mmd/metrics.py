"""MMD evaluation, theoretical error-bound curves and design diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .kernels import KernelSpec
from .targets import Empirical

__all__ = [
    "mmd_squared",
    "mmd_distance_squared",
    "mmd_distance_metric",
    "BoundSpec",
    "bound_curve",
    "bound_tag",
    "BOUND_TAGS",
    "covering_radius",
    "theta_heuristic",
    "recursion_sequence",
    "recursion_bound",
]

MASS_TOL = 1e-10

# tag -> (formula, conditional formula or None)
BOUND_TAGS = {
    "kh_inv_k": ("kh_log", "b_over_n"),
    "kh_two_over_kplus1": ("four_b", None),
    "kh_optimal": ("four_b", "b_over_n"),
    "kh_iwo_i": ("four_b", "b_over_n"),
    "kh_iwo_ii": ("four_b", "b_over_n_plus_2"),
    "kh_iwo_iii": ("four_kbar", None),
    "gm_inv_k": ("gm_log", "b_over_n"),
    "gm_two_over_kplus1": ("four_b", None),
    "gm_optimal": ("four_b", "b_over_n"),
    "sbq_unconstrained": ("four_kbar", None),
    "sbq_sum_one": ("four_b", "b_over_n_plus_2"),
    "sbq_coord_descent": ("four_kbar", None),
}


def _weights_points(measure):
    w = np.asarray(measure.weights, dtype=float)
    X = np.asarray(measure.support, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != w.shape[0]:
        raise ValueError("support and weights have different lengths")
    return X, w


def mmd_squared(measure, target, kernel: KernelSpec, path="direct"):
    """MMD^2(mu, xi) for a discrete measure xi.

    Parameters
    ----------
    measure : DiscreteMeasure
    target : target measure providing ``potential`` and ``energy``
    kernel : KernelSpec
    path : {"direct", "reduced"}
        ``direct`` evaluates w^T K w - 2 w^T p + E. ``reduced`` evaluates the
        reduced-kernel quadratic form w^T K_mu w and requires total mass one.
    """
    X, w = _weights_points(measure)
    mass = float(w.sum())
    if abs(mass - 1.0) > MASS_TOL and (path == "reduced" or not kernel.is_spd):
        raise ValueError(f"total mass {mass:.12g} != 1 is not allowed here")
    G = kernel.gram(X, X)
    p = target.potential(kernel, X)
    E = target.energy(kernel)
    if path == "direct":
        return float(w @ G @ w - 2.0 * w @ p + E)
    if path == "reduced":
        Kmu = G - p[:, None] - p[None, :] + E
        return float(w @ Kmu @ w)
    raise ValueError(f"unknown path {path!r}")


def mmd_distance_squared(measure, cs):
    """Squared MMD under the distance kernel against the uniform measure on ``cs``."""
    X, w = _weights_points(measure)
    if abs(w.sum() - 1.0) > MASS_TOL:
        raise ValueError("the distance-kernel metric needs a measure of total mass one")
    ref = cs if isinstance(cs, Empirical) else Empirical(cs.points)
    return mmd_squared(measure, ref, KernelSpec("distance"))


def mmd_distance_metric(measure, cs):
    """MMD_{K_D}(mu_C, xi); tiny negative round-off is clipped to zero."""
    return float(np.sqrt(max(mmd_distance_squared(measure, cs), 0.0)))


@dataclass
class BoundSpec:
    """Constants of the finite-sample error bounds.

    Attributes
    ----------
    tag : str
        Method tag, see ``BOUND_TAGS``.
    kbar : float
        Global bound on K(x, x).
    kbar_c : float
        Max of K(x, x) over the candidate set.
    tau_half : float
        tau_{1/2}(mu).
    positive : bool
        Whether the kernel is nonnegative.
    mc2_lower, mc2_upper : float
        Certified bracket of M_C^2.
    """

    tag: str
    kbar: float
    kbar_c: float
    tau_half: float
    positive: bool
    mc2_lower: float = 0.0
    mc2_upper: float = 0.0

    def __post_init__(self):
        if self.tag not in BOUND_TAGS:
            raise ValueError(f"no bound for method tag {self.tag!r}")

    @property
    def b_c(self):
        return (2.0 if self.positive else 4.0) * self.kbar_c

    @property
    def a_c(self):
        if self.positive:
            return self.kbar_c + self.tau_half**2
        return (np.sqrt(self.kbar_c) + self.tau_half) ** 2

    @property
    def has_conditional(self):
        return BOUND_TAGS[self.tag][1] is not None

    def term(self, n, conditional=False):
        n = np.asarray(n, dtype=float)
        kind = BOUND_TAGS[self.tag][1 if conditional else 0]
        if kind is None:
            raise ValueError(f"{self.tag!r} has no conditional bound")
        B = self.b_c
        if kind == "kh_log":
            return B * (2.0 + np.log(n)) / (n + 1.0)
        if kind == "gm_log":
            return self.a_c * (1.0 + np.log(n)) / n
        if kind == "four_b":
            return 4.0 * B / (n + 3.0)
        if kind == "four_kbar":
            return 4.0 * self.kbar / (n + 13.0 / 3.0)
        if kind == "b_over_n":
            return B / n
        # b_over_n_plus_2 only holds from n = 2 on
        return np.where(n >= 2, B / (n + 2.0), np.inf)


def bound_tag(method, step_rule=None, variant=None):
    """Bound tag for a method configuration; ``None`` for custom step rules."""
    if method in ("kh_predefined", "gm_predefined"):
        if not isinstance(step_rule, str):
            return None
        return f"{method[:2]}_{step_rule}"
    if method in ("kh_optimal", "gm_optimal"):
        return method
    if method == "kh_iwo":
        return "kh_iwo_" + (variant or "ii_sum_one").split("_")[0]
    if method == "sbq":
        return "sbq_" + (variant or "unconstrained")
    raise ValueError(f"unknown method {method!r}")


def bound_curve(spec: BoundSpec, n_max, conditional=False, mc2="upper"):
    """Bound values for n = 1..n_max.

    Returns a dict with ``upper`` (bound using the certified upper end of
    M_C^2), ``lower`` (using the lower end) and ``conditional`` flag.
    ``mc2="zero"`` replaces both ends by 0, the stricter variant.
    """
    n = np.arange(1, n_max + 1)
    term = spec.term(n, conditional)
    lo, hi = (0.0, 0.0) if mc2 == "zero" else (spec.mc2_lower, spec.mc2_upper)
    return {"n": n, "upper": hi + term, "lower": lo + term, "conditional": conditional}


def covering_radius(design, lower, upper, grid=512):
    """Grid approximation of max_{x in box} min_i ||x - x_i||.

    The box is scanned on a regular grid of ``grid`` points per axis (ends
    included), so the value is a lower approximation of the true radius.
    """
    design = np.asarray(design, dtype=float)
    if design.ndim == 1:
        design = design[:, None]
    if design.shape[0] == 0:
        raise ValueError("empty design")
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    axes = [np.linspace(a, b, grid) for a, b in zip(lower, upper)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, lower.size)
    worst = 0.0
    step = max(1, (1 << 22) // design.shape[0])
    for start in range(0, mesh.shape[0], step):
        block = mesh[start:start + step]
        diff = block[:, None, :] - design[None, :, :]
        d2 = np.min(np.sum(diff * diff, axis=-1), axis=1)
        worst = max(worst, float(d2.max()))
    return float(np.sqrt(worst))


def theta_heuristic(points, n_max, sample=1000, seed=0):
    """Bandwidth making exp(-theta * d^2) < 1/2 for a 1/n_max share of pairs.

    The squared distances are taken over the distinct pairs of a random
    subsample of ``sample`` points.
    """
    points = np.asarray(points, dtype=float)
    rng = np.random.default_rng(seed)
    if points.shape[0] > sample:
        points = points[rng.choice(points.shape[0], sample, replace=False)]
    d2 = pdist(points, "sqeuclidean")
    return float(-np.log(0.5) / np.quantile(d2, 1.0 / n_max))


def recursion_sequence(case, A, k_max, t1=None):
    """Worst-case sequences of the four recurrences bounding Delta_C.

    ``case`` is ``i`` (t_{k+1} = (1-a)t + A a^2, a = 1/(k+1)), ``ii`` (same,
    a = 2/(k+2)), ``iii`` (t_{k+1} = (1-2a)t + A a^2, a = 1/(k+1)) or ``iv``
    (t_{k+1} = t - t^2/A). Returns t_1..t_{k_max}.
    """
    t = np.empty(k_max)
    t[0] = A if t1 is None else t1
    for k in range(1, k_max):
        prev = t[k - 1]
        if case == "i":
            a = 1.0 / (k + 1)
            t[k] = (1.0 - a) * prev + A * a * a
        elif case == "ii":
            a = 2.0 / (k + 2)
            t[k] = (1.0 - a) * prev + A * a * a
        elif case == "iii":
            a = 1.0 / (k + 1)
            t[k] = (1.0 - 2.0 * a) * prev + A * a * a
        elif case == "iv":
            t[k] = prev - prev * prev / A
        else:
            raise ValueError(f"unknown case {case!r}")
    return t


def recursion_bound(case, A, k, p=None):
    """Closed-form bound for ``recursion_sequence``; case ``iv`` needs the offset ``p``."""
    k = np.asarray(k, dtype=float)
    if case == "i":
        return A * (2.0 + np.log(k)) / (k + 1.0)
    if case == "ii":
        return 4.0 * A / (k + 3.0)
    if case == "iii":
        return A / k
    if case == "iv":
        if p is None:
            raise ValueError("case iv needs the offset p")
        return A / (k + p)
    raise ValueError(f"unknown case {case!r}")
