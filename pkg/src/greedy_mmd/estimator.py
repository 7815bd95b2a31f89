"""Estimator-style front end over the functional constructions."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .algorithms import run_method
from .candidates import CandidateSet
from .kernels import KernelSpec
from .metrics import mmd_squared
from .targets import Empirical


class GreedyMMDQuantizer(BaseEstimator):
    """Select a weighted subset of candidate points approximating a target.

    Parameters
    ----------
    method : str, default="kh_predefined"
        One of ``kh_predefined``, ``kh_optimal``, ``kh_iwo``,
        ``gm_predefined``, ``gm_optimal`` or ``sbq``.
    n_points : int, default=50
        Number of greedy iterations.
    kernel : str, default="gaussian_rbf"
        Kernel family.
    theta : float, default=1.0
        Kernel bandwidth.
    step_rule : str or sequence, default="inv_k"
        Step sizes for the predefined-step methods.
    variant : str, optional
        Weight variant for ``kh_iwo`` and ``sbq``.
    target : object, optional
        Target measure with ``potential`` and ``energy``. When omitted, the
        uniform measure on the candidates passed to :meth:`fit` is used.

    Attributes
    ----------
    support_ : ndarray of shape (m, d)
    weights_ : ndarray of shape (m,)
    indices_ : ndarray of shape (m,)
        Row indices of the support in the (deduplicated) candidate array.
    mmd2_ : float
        MMD^2 between the target and the fitted measure.
    trace_ : list of IterationRecord
    status_ : str
    n_features_in_ : int
    """

    def __init__(self, method="kh_predefined", n_points=50, kernel="gaussian_rbf", theta=1.0,
                 step_rule="inv_k", variant=None, target=None):
        self.method = method
        self.n_points = n_points
        self.kernel = kernel
        self.theta = theta
        self.step_rule = step_rule
        self.variant = variant
        self.target = target

    def _kernel_spec(self):
        return KernelSpec(self.kernel, float(self.theta))

    def fit(self, X, y=None):
        """Run the greedy construction on candidate points ``X``."""
        X = check_array(X, dtype=float, ensure_min_samples=1)
        if not isinstance(self.n_points, (int, np.integer)) or self.n_points < 1:
            raise ValueError(f"n_points must be a positive integer, got {self.n_points!r}")
        kernel = self._kernel_spec()
        target = Empirical(X) if self.target is None else self.target
        cs = CandidateSet(X, kernel, target)
        res = run_method(self.method, cs, int(self.n_points), step_rule=self.step_rule, variant=self.variant)
        self.n_features_in_ = X.shape[1]
        self.candidates_ = cs
        self.support_ = res.measure.support
        self.weights_ = res.measure.weights
        self.indices_ = res.measure.indices
        self.trace_ = res.trace
        self.status_ = res.status
        self.mmd2_ = res.trace[-1].mmd2 if res.trace else float(cs.energy)
        self.result_ = res
        return self

    def integrate(self, func):
        """Quadrature estimate sum_i w_i f(x_i) of the integral of ``func``."""
        check_is_fitted(self, "weights_")
        vals = np.asarray(func(self.support_), dtype=float)
        return float(self.weights_ @ vals)

    def score(self, X=None, y=None):
        """Negative MMD^2 to the target (or to the uniform measure on ``X``)."""
        check_is_fitted(self, "weights_")
        if X is None:
            return -float(self.mmd2_)
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return -mmd_squared(self.result_.measure, Empirical(X), self._kernel_spec())
