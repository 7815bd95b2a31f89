"""Kernels used for MMD quantisation.

Three families are available:

- ``matern32_product``: product over coordinates of 1-d Matérn 3/2 covariances,
  ``prod_i (1 + sqrt(3) theta |x_i - y_i|) exp(-sqrt(3) theta |x_i - y_i|)``.
- ``gaussian_rbf``: ``exp(-theta ||x - y||^2)``.
- ``distance``: ``-||x - y||`` (energy distance). Conditionally positive
  definite only, so it is accepted by the evaluation metric and rejected by
  every construction algorithm.

Kernels are pure functions of ``(spec, x, y)``; caching of diagonals and
potentials lives in :class:`greedy_mmd.candidates.CandidateSet`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["KernelSpec", "FAMILIES", "reduced_eval"]

FAMILIES = ("matern32_product", "gaussian_rbf", "distance")

SQRT3 = np.sqrt(3.0)


def _as_points(X, d=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :] if d is None or X.shape[0] == d else X[:, None]
    if X.ndim != 2:
        raise ValueError(f"points must be a 2-d array, got shape {X.shape}")
    return X


@dataclass(frozen=True)
class KernelSpec:
    """A symmetric kernel on R^d.

    Parameters
    ----------
    family : str
        One of ``matern32_product``, ``gaussian_rbf`` or ``distance``.
    theta : float
        Bandwidth (inverse length-scale). Ignored by ``distance``.
    """

    family: str
    theta: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        if self.family != "distance" and not (np.isfinite(self.theta) and self.theta > 0):
            raise ValueError(f"theta must be positive, got {self.theta}")

    @property
    def is_positive(self) -> bool:
        return self.family != "distance"

    @property
    def is_spd(self) -> bool:
        return self.family != "distance"

    @property
    def kbar(self) -> float:
        """Uniform bound on K(x, x) over R^d."""
        return 0.0 if self.family == "distance" else 1.0

    def require_spd(self, what="this algorithm"):
        if not self.is_spd:
            raise ValueError(f"{what} requires a strictly positive definite kernel, got {self.family!r}")

    def gram(self, X, Y) -> np.ndarray:
        """Matrix of K(X[i], Y[j]).

        Differences are formed explicitly (no ``|a|^2 + |b|^2 - 2ab`` expansion)
        so that ``gram(X, Y) == gram(Y, X).T`` holds bit-for-bit.
        """
        X = _as_points(X)
        Y = _as_points(Y)
        if X.shape[1] != Y.shape[1]:
            raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
        diff = X[:, None, :] - Y[None, :, :]
        return self._from_diff(diff)

    def column(self, X, y) -> np.ndarray:
        """Vector of K(X[i], y) for a single point ``y``."""
        X = _as_points(X)
        y = np.asarray(y, dtype=float).reshape(-1)
        if X.shape[1] != y.shape[0]:
            raise ValueError(f"dimension mismatch: {X.shape[1]} vs {y.shape[0]}")
        return self._from_diff(X - y)

    def eval(self, x, y) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        y = np.asarray(y, dtype=float).reshape(-1)
        if x.shape != y.shape:
            raise ValueError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
        return float(self._from_diff(x - y))

    __call__ = eval

    def diag(self, X) -> np.ndarray:
        X = _as_points(X)
        if self.family == "distance":
            return np.zeros(X.shape[0])
        return np.ones(X.shape[0])

    def _from_diff(self, diff):
        if self.family == "matern32_product":
            t = SQRT3 * self.theta * np.abs(diff)
            return np.prod((1.0 + t) * np.exp(-t), axis=-1)
        sq = np.sum(diff * diff, axis=-1)
        if self.family == "gaussian_rbf":
            return np.exp(-self.theta * sq)
        return -np.sqrt(sq)

    def to_dict(self):
        return {"family": self.family, "theta": float(self.theta)}


def reduced_eval(kernel: KernelSpec, target, x, y) -> float:
    """Reduced kernel K_mu(x, y) = K(x, y) - P(x) - P(y) + E_K(mu)."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    y = np.asarray(y, dtype=float).reshape(1, -1)
    px = target.potential(kernel, x)[0]
    py = target.potential(kernel, y)[0]
    return kernel.eval(x, y) - px - py + target.energy(kernel)
