"""Greedy quantisation of probability measures by MMD minimisation."""

from .algorithms import (
    DiscreteMeasure,
    RunResult,
    gm_optimal,
    gm_predefined,
    iid_baseline,
    kh_iwo,
    kh_optimal,
    kh_predefined,
    olwo_postprocess,
    run_method,
    sbq,
)
from .candidates import CandidateSet, CandidateSource
from .estimator import GreedyMMDQuantizer
from .kernels import KernelSpec, reduced_eval
from .metrics import BoundSpec, bound_curve, covering_radius, mmd_squared
from .targets import Empirical, GaussianMixture, UniformBox, make_target

__version__ = "0.1.0"
