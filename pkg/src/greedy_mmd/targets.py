"""Target measures with closed-form kernel potentials and energies.

Supported (target, kernel) pairings:

=================  ==================  =============================
target             kernel              potential / energy
=================  ==================  =============================
UniformBox         matern32_product    product of 1-d closed forms
GaussianMixture    gaussian_rbf        closed form
Empirical          any                 averages over reference points
=================  ==================  =============================

Any other pairing raises :class:`UnsupportedPairingError`; there is no
Monte-Carlo fallback.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .kernels import SQRT3, KernelSpec, _as_points

__all__ = [
    "TargetMoments",
    "UnsupportedPairingError",
    "UniformBox",
    "GaussianMixture",
    "Empirical",
    "make_target",
    "matern32_segment_integral",
    "matern32_uniform_energy_1d",
]

_CHUNK = 1 << 22  # max kernel entries materialised at once


class UnsupportedPairingError(ValueError):
    pass


@dataclass(frozen=True)
class TargetMoments:
    energy: float
    tau_half: float
    tau_one: float


def matern32_segment_integral(s, lam):
    """Signed integral of (1 + lam|u|) exp(-lam|u|) over u in [0, s]."""
    s = np.asarray(s, dtype=float)
    a = np.abs(s)
    val = -2.0 * np.expm1(-lam * a) / lam - a * np.exp(-lam * a)
    return np.sign(s) * val


def matern32_uniform_energy_1d(length, lam):
    """Mean of the 1-d Matérn 3/2 kernel over two independent U[0, length] draws."""
    t = lam * length
    if t < 1.0:
        # the closed form cancels badly for small t; sum its alternating
        # Taylor series instead (terms fall faster than 1/k! for t < 1)
        k = np.arange(4, 24)
        coef = (-1.0) ** k * (3.0 - k) / special.factorial(k)
        return 1.0 + 2.0 * float(np.sum(coef * t ** (k - 2.0)))
    return 2.0 * (2.0 * t - 3.0 + (t + 3.0) * np.exp(-t)) / t**2


def _unsupported(target, kernel):
    return UnsupportedPairingError(
        f"no closed form for target {target.variant!r} with kernel {kernel.family!r}"
    )


class UniformBox:
    """Uniform probability measure on a box ``prod_i [lower_i, upper_i]``."""

    variant = "uniform_box"
    samplable = True

    def __init__(self, lower, upper):
        self.lower = np.atleast_1d(np.asarray(lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise ValueError("lower and upper must be 1-d arrays of equal length")
        if np.any(self.upper <= self.lower):
            raise ValueError("upper must exceed lower in every dimension")

    @property
    def dim(self):
        return self.lower.shape[0]

    def potential(self, kernel: KernelSpec, X) -> np.ndarray:
        if kernel.family != "matern32_product":
            raise _unsupported(self, kernel)
        X = _as_points(X, self.dim)
        if X.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: {X.shape[1]} vs {self.dim}")
        lam = SQRT3 * kernel.theta
        width = self.upper - self.lower
        per_dim = (
            matern32_segment_integral(self.upper - X, lam)
            - matern32_segment_integral(self.lower - X, lam)
        ) / width
        return np.prod(per_dim, axis=1)

    def energy(self, kernel: KernelSpec) -> float:
        if kernel.family != "matern32_product":
            raise _unsupported(self, kernel)
        lam = SQRT3 * kernel.theta
        return float(np.prod([matern32_uniform_energy_1d(w, lam) for w in self.upper - self.lower]))

    def moments(self, kernel: KernelSpec) -> TargetMoments:
        return TargetMoments(self.energy(kernel), 1.0, 1.0)

    def sample(self, n, rng) -> np.ndarray:
        return self.lower + (self.upper - self.lower) * rng.random((n, self.dim))

    def to_dict(self):
        return {"variant": self.variant, "lower": self.lower.tolist(), "upper": self.upper.tolist()}


class GaussianMixture:
    """Mixture of isotropic normals ``sum_j beta_j N(a_j, sigma_j^2 I)``."""

    variant = "gaussian_mixture"
    samplable = True

    def __init__(self, weights, means, sds):
        self.weights = np.atleast_1d(np.asarray(weights, dtype=float))
        self.means = np.atleast_2d(np.asarray(means, dtype=float))
        self.sds = np.broadcast_to(np.asarray(sds, dtype=float), self.weights.shape).copy()
        if self.means.shape[0] != self.weights.shape[0]:
            raise ValueError("one mean per mixture component is required")
        if np.any(self.weights <= 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be positive and sum to one")
        if np.any(self.sds <= 0):
            raise ValueError("component standard deviations must be positive")

    @property
    def dim(self):
        return self.means.shape[1]

    def potential(self, kernel: KernelSpec, X) -> np.ndarray:
        if kernel.family != "gaussian_rbf":
            raise _unsupported(self, kernel)
        X = _as_points(X, self.dim)
        if X.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: {X.shape[1]} vs {self.dim}")
        th, d = kernel.theta, self.dim
        out = np.zeros(X.shape[0])
        for beta, a, sd in zip(self.weights, self.means, self.sds):
            c = 1.0 + 2.0 * th * sd**2
            diff = X - a
            sq = np.sum(diff * diff, axis=1)
            out += beta * c ** (-d / 2) * np.exp(-th * sq / c)
        return out

    def energy(self, kernel: KernelSpec) -> float:
        if kernel.family != "gaussian_rbf":
            raise _unsupported(self, kernel)
        th, d = kernel.theta, self.dim
        total = 0.0
        for bj, aj, sj in zip(self.weights, self.means, self.sds):
            for bl, al, sl in zip(self.weights, self.means, self.sds):
                c = 1.0 + 2.0 * th * sj**2 + 2.0 * th * sl**2
                diff = aj - al
                total += bj * bl * c ** (-d / 2) * np.exp(-th * np.dot(diff, diff) / c)
        return float(total)

    def moments(self, kernel: KernelSpec) -> TargetMoments:
        return TargetMoments(self.energy(kernel), 1.0, 1.0)

    def sample(self, n, rng) -> np.ndarray:
        # inverse-CDF component choice, then an isotropic normal draw
        cdf = np.cumsum(self.weights)
        cdf[-1] = 1.0
        comp = np.searchsorted(cdf, rng.random(n), side="right")
        z = rng.standard_normal((n, self.dim))
        return self.means[comp] + self.sds[comp, None] * z

    def to_dict(self):
        return {
            "variant": self.variant,
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "sds": self.sds.tolist(),
        }


class Empirical:
    """Uniform measure on a finite reference set of points.

    Potentials are filled lazily in a per-point cache; energy is computed once
    per kernel.
    """

    variant = "empirical"
    samplable = False

    def __init__(self, points):
        self.points = _as_points(points)
        if self.points.shape[0] == 0:
            raise ValueError("empirical target needs at least one reference point")
        self._pot_cache = {}
        self._energy_cache = {}

    @property
    def dim(self):
        return self.points.shape[1]

    def _mean_column(self, kernel, X):
        ref = self.points
        rows = max(1, _CHUNK // ref.shape[0])
        out = np.empty(X.shape[0])
        for start in range(0, X.shape[0], rows):
            out[start:start + rows] = kernel.gram(X[start:start + rows], ref).mean(axis=1)
        return out

    def potential(self, kernel: KernelSpec, X) -> np.ndarray:
        X = _as_points(X, self.dim)
        if X.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: {X.shape[1]} vs {self.dim}")
        cache = self._pot_cache.setdefault(kernel, {})
        keys = [row.tobytes() for row in X]
        missing = [i for i, key in enumerate(keys) if key not in cache]
        if missing:
            vals = self._mean_column(kernel, X[missing])
            for i, v in zip(missing, vals):
                cache[keys[i]] = float(v)
        return np.array([cache[key] for key in keys])

    def energy(self, kernel: KernelSpec) -> float:
        if kernel not in self._energy_cache:
            self._energy_cache[kernel] = float(np.mean(self._mean_column(kernel, self.points)))
        return self._energy_cache[kernel]

    def moments(self, kernel: KernelSpec) -> TargetMoments:
        diag = kernel.diag(self.points)
        return TargetMoments(self.energy(kernel), float(np.mean(np.sqrt(diag))), float(np.mean(diag)))

    def sample(self, n, rng):
        raise ValueError("empirical targets are not samplable")

    def to_dict(self):
        return {"variant": self.variant, "n_points": int(self.points.shape[0])}


def make_target(spec: dict):
    """Build a target from a config mapping ``{variant: ..., params...}``."""
    spec = dict(spec)
    variant = spec.pop("variant", None)
    if variant == "uniform_box":
        return UniformBox(spec["lower"], spec["upper"])
    if variant == "gaussian_mixture":
        return GaussianMixture(spec["weights"], spec["means"], spec["sds"])
    if variant == "empirical":
        return Empirical(np.loadtxt(spec["path"], delimiter=",", comments="#", ndmin=2))
    raise ValueError(f"unknown target variant {variant!r}")
