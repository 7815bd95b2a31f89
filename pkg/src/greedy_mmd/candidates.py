"""Finite candidate sets and the generators that produce them."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import qmc

from .kernels import KernelSpec

__all__ = ["CandidateSet", "CandidateSource", "build", "generate_points", "resample", "load_points", "halton_points"]

MODES = ("file", "uniform_rng", "halton", "iid_target")


class CandidateSet:
    """C distinct points with cached diagonals K(x, x) and potentials P_mu(x).

    Attributes
    ----------
    points : ndarray of shape (C, d)
    diag : ndarray of shape (C,)
    pot : ndarray of shape (C,)
    energy : float
        E_K(mu) of the target the potentials refer to.
    kbar_c : float
        max of ``diag``.
    kmu_bar_c : float
        max over candidates of K_mu(x, x) = K(x, x) - 2 P_mu(x) + E_K(mu).
    """

    def __init__(self, points, kernel: KernelSpec, target, dedup=True):
        points = np.asarray(points, dtype=float)
        if points.ndim != 2:
            raise ValueError(f"candidate points must be a (C, d) array, got shape {points.shape}")
        if not np.all(np.isfinite(points)):
            raise ValueError("candidate points must be finite")
        if dedup and points.shape[0] > 1:
            _, first = np.unique(points, axis=0, return_index=True)
            if first.size < points.shape[0]:
                warnings.warn(
                    f"dropped {points.shape[0] - first.size} duplicate candidate points",
                    stacklevel=2,
                )
                points = points[np.sort(first)]
        if points.shape[0] == 0:
            raise ValueError("candidate set is empty")
        self.points = points
        self.kernel = kernel
        self.target = target
        self.diag = kernel.diag(points)
        self.pot = target.potential(kernel, points)
        self.energy = target.energy(kernel)
        self.kbar_c = float(self.diag.max())
        self.kmu_bar_c = float(np.max(self.diag - 2.0 * self.pot + self.energy))

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    def column(self, j) -> np.ndarray:
        """K(x^(i), x^(j)) for all candidates i."""
        return self.kernel.column(self.points, self.points[j])

    def reduced_diag(self) -> np.ndarray:
        return self.diag - 2.0 * self.pot + self.energy


@dataclass
class CandidateSource:
    """Recipe for a candidate set.

    ``box`` is ``(lower, upper)`` and is required by ``uniform_rng`` and
    ``halton``. ``resample_each_iteration`` is honoured only by the
    one-step-ahead algorithms and only with ``iid_target``.
    """

    mode: str
    path: str | None = None
    seed: int = 0
    box: tuple | None = None
    offset: int = 0
    resample_each_iteration: bool = False
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown candidate mode {self.mode!r}; expected one of {MODES}")
        if self.resample_each_iteration and self.mode != "iid_target":
            raise ValueError("resample_each_iteration requires mode 'iid_target'")
        if self.mode in ("uniform_rng", "halton") and self.box is None:
            raise ValueError(f"mode {self.mode!r} needs a box")
        if self.mode == "file" and not self.path:
            raise ValueError("mode 'file' needs a path")

    def to_dict(self):
        return {
            "mode": self.mode,
            "path": self.path,
            "seed": self.seed,
            "box": None if self.box is None else [list(map(float, b)) for b in self.box],
            "offset": self.offset,
            "resample": self.resample_each_iteration,
        }


def load_points(path) -> np.ndarray:
    """Read a CSV of points, one per row; lines starting with '#' are skipped."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"candidate file not found: {path}")
    try:
        pts = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    except ValueError as exc:
        raise ValueError(f"cannot parse candidate file {path}: {exc}") from exc
    return pts


def halton_points(n, lower, upper, offset=0) -> np.ndarray:
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    gen = qmc.Halton(d=lower.shape[0], scramble=False)
    if offset:
        gen.fast_forward(offset)
    return lower + (upper - lower) * gen.random(n)


def _draw(src: CandidateSource, C, target, rng):
    if src.mode == "uniform_rng":
        lower, upper = (np.asarray(b, dtype=float) for b in src.box)
        return lower + (upper - lower) * rng.random((C, lower.shape[0]))
    if not getattr(target, "samplable", False):
        raise ValueError(f"iid_target needs a samplable target, got {target.variant!r}")
    return target.sample(C, rng)


def generate_points(src: CandidateSource, C, target) -> np.ndarray:
    """Raw candidate points of ``src`` (before deduplication and caching)."""
    if C is not None and C < 1:
        raise ValueError("C must be at least 1")
    if src.mode == "file":
        pts = load_points(src.path)
        if C is not None:
            pts = pts[:C]
    elif src.mode == "halton":
        pts = halton_points(C, src.box[0], src.box[1], src.offset)
    else:
        pts = _draw(src, C, target, np.random.default_rng(src.seed))
    if hasattr(target, "dim") and pts.shape[1] != target.dim:
        raise ValueError(f"candidate dimension {pts.shape[1]} does not match target dimension {target.dim}")
    return pts


def build(src: CandidateSource, C, target, kernel: KernelSpec) -> CandidateSet:
    """Generate the candidate points of ``src`` and fill their caches."""
    return CandidateSet(generate_points(src, C, target), kernel, target)


def resample(src: CandidateSource, iteration, C, target, kernel: KernelSpec) -> CandidateSet:
    """Fresh iid candidate set for ``iteration``; deterministic in (seed, iteration)."""
    if not src.resample_each_iteration or src.mode != "iid_target":
        raise ValueError("resample needs an iid_target source with resample_each_iteration set")
    rng = np.random.default_rng([src.seed, iteration])
    return CandidateSet(_draw(src, C, target, rng), kernel, target)
