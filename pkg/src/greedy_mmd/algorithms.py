"""Greedy constructions of discrete measures minimising MMD(mu, xi).

Every construction selects support points from a finite candidate set and
returns a :class:`RunResult` holding the final measure and a per-iteration
trace. Each trace record carries the MMD^2 evaluated directly from the
support Gram matrix and the value maintained by the algorithm's own running
state, so the two can be audited against each other.

Argmin/argmax scans break ties by the smallest candidate index.
"""

from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from . import candidates as cand_mod
from .linalg import (
    GramState,
    NearDuplicateError,
    hat_weights,
    simplex_weights,
    tilde_weights,
)

__all__ = [
    "DiscreteMeasure",
    "IterationRecord",
    "RunResult",
    "AuditError",
    "step_sequence",
    "kh_predefined",
    "kh_optimal",
    "kh_iwo",
    "gm_predefined",
    "gm_optimal",
    "sbq",
    "iid_baseline",
    "olwo_postprocess",
    "run_method",
    "METHODS",
    "ONE_STEP_METHODS",
]

ALPHA_ZERO_TOL = 1e-14
AUDIT_RTOL = 1e-8


class AuditError(RuntimeError):
    """Running state disagrees with a from-scratch recomputation."""


class _Clock:
    """Wall clock that can be paused while diagnostics run."""

    def __init__(self):
        self._start = time.perf_counter()
        self._paused = 0.0

    @contextmanager
    def paused(self):
        t = time.perf_counter()
        try:
            yield
        finally:
            self._paused += time.perf_counter() - t

    def elapsed(self):
        return time.perf_counter() - self._start - self._paused


@dataclass
class DiscreteMeasure:
    """Signed measure sum_i weights[i] * delta(support[i]).

    ``indices`` are candidate indices of the support points (``-1`` when the
    candidate set was resampled and indices are not comparable).
    """

    support: np.ndarray
    weights: np.ndarray
    indices: np.ndarray

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    def __len__(self):
        return self.weights.shape[0]


@dataclass
class IterationRecord:
    k: int
    index: int
    alpha: float
    mmd2: float
    mmd2_recursive: float
    support_size: int
    time_s: float
    score: float = float("nan")


@dataclass
class RunResult:
    method: str
    measure: DiscreteMeasure
    trace: list
    selected: np.ndarray
    selected_points: np.ndarray
    status: str = "completed"
    floor_hits: int = 0
    info: dict = field(default_factory=dict)

    @property
    def mmd2(self) -> np.ndarray:
        return np.array([r.mmd2 for r in self.trace])

    @property
    def mmd2_recursive(self) -> np.ndarray:
        return np.array([r.mmd2_recursive for r in self.trace])


def step_sequence(rule, n):
    """Step sizes alpha_1..alpha_n for a named rule or an explicit sequence."""
    k = np.arange(1, n + 1, dtype=float)
    if isinstance(rule, str):
        if rule == "inv_k":
            return 1.0 / k
        if rule == "two_over_kplus1":
            return 2.0 / (k + 1.0)
        raise ValueError(f"unknown step rule {rule!r}")
    seq = np.asarray(rule, dtype=float)
    if seq.shape[0] < n:
        raise ValueError(f"custom step sequence has {seq.shape[0]} entries, need {n}")
    seq = seq[:n]
    if seq[0] != 1.0 or np.any((seq < 0) | (seq > 1)):
        raise ValueError("custom steps must lie in [0, 1] with alpha_1 = 1")
    return seq


class _Atoms:
    """Selected points in selection order with their Gram matrix and weights."""

    def __init__(self, dim, capacity=64):
        self.points = np.zeros((capacity, dim))
        self.gram = np.zeros((capacity, capacity))
        self.pot = np.zeros(capacity)
        self.w = np.zeros(capacity)
        self.idx = []
        self.n = 0

    def add(self, point, kvec, kself, pot, index):
        n = self.n
        if n == self.points.shape[0]:
            cap = 2 * n
            self.points = np.resize(self.points, (cap, self.points.shape[1]))
            g = np.zeros((cap, cap))
            g[:n, :n] = self.gram[:n, :n]
            self.gram = g
            self.pot = np.resize(self.pot, cap)
            self.w = np.resize(self.w, cap)
        self.points[n] = point
        self.gram[n, :n] = kvec
        self.gram[:n, n] = kvec
        self.gram[n, n] = kself
        self.pot[n] = pot
        self.w[n] = 0.0
        self.idx.append(index)
        self.n = n + 1

    def mmd2(self, energy, w=None):
        n = self.n
        w = self.w[:n] if w is None else w
        return float(w @ self.gram[:n, :n] @ w - 2.0 * w @ self.pot[:n] + energy)

    def measure(self, w=None):
        n = self.n
        w = self.w[:n] if w is None else w
        idx = np.array(self.idx, dtype=int)
        if np.all(idx >= 0):
            uniq, first, inv = np.unique(idx, return_index=True, return_inverse=True)
            order = np.argsort(first)
            merged = np.zeros(uniq.size)
            np.add.at(merged, inv, w)
            return DiscreteMeasure(self.points[first[order]].copy(), merged[order], uniq[order])
        return DiscreteMeasure(self.points[:n].copy(), w.copy(), idx)


def _check_kernel(cs):
    cs.kernel.require_spd("greedy MMD construction")


def _audit(k, cs, atoms, S, Q, R):
    n = atoms.n
    w = atoms.w[:n]
    S_ref = cs.kernel.gram(cs.points, atoms.points[:n]) @ w
    Q_ref = float(w @ atoms.gram[:n, :n] @ w)
    R_ref = float(w @ atoms.pot[:n])
    bad = [
        name
        for name, run, ref in (("S", S, S_ref), ("Q", Q, Q_ref), ("R", R, R_ref))
        if np.max(np.abs(np.asarray(run) - ref) / np.maximum(1.0, np.abs(ref))) > AUDIT_RTOL
    ]
    if bad:
        raise AuditError(f"running {', '.join(bad)} drifted from recomputation at iteration {k}")


def _one_step_ahead(kind, cs, n, steps=None, source=None, audit_every=10, name=None):
    """Shared loop of the one-step-ahead methods.

    ``kind`` is one of ``kh``, ``kh_opt``, ``gm``, ``gm_opt``. With a
    resampling ``source`` a fresh candidate set is drawn at every iteration
    and the running potentials are recomputed on it.
    """
    _check_kernel(cs)
    if n < 1:
        raise ValueError("n must be at least 1")
    if len(cs) == 0:
        raise ValueError("empty candidate set")
    resampling = source is not None and source.resample_each_iteration
    kernel, E = cs.kernel, cs.energy
    atoms = _Atoms(cs.dim)
    S = np.zeros(len(cs))
    Q = R = 0.0
    trace, selected, sel_pts = [], [], []
    distinct = set()
    status = "completed"
    clock = _Clock()
    for k in range(1, n + 1):
        if resampling and k > 1:
            C = len(cs)
            cs = cand_mod.resample(source, k, C, cs.target, kernel)
            S = kernel.gram(cs.points, atoms.points[: atoms.n]) @ atoms.w[: atoms.n]
        pot, diag = cs.pot, cs.diag
        if kind in ("kh", "kh_opt"):
            v = S - pot
            j = int(np.argmin(v))
            score = float(v[j])
            if kind == "kh":
                alpha = steps[k - 1]
            elif k == 1:
                alpha = 1.0
            else:
                A = Q - R + pot[j] - S[j]
                B = Q - 2.0 * S[j] + diag[j]
                # B = MMD^2(xi, delta_x) vanishes only when xi = delta_x, and then A = 0 too
                if B <= ALPHA_ZERO_TOL * cs.kbar_c:
                    if A > ALPHA_ZERO_TOL * cs.kbar_c:
                        raise FloatingPointError(f"non-positive curvature B={B:.3e} with A={A:.3e} at iteration {k}")
                    alpha = 0.0
                else:
                    alpha = min(A / B, 1.0)
                if alpha <= ALPHA_ZERO_TOL:
                    status = "alpha_zero"
                    break
        elif kind == "gm":
            alpha = steps[k - 1]
            crit = 2.0 * (1.0 - alpha) * S + alpha * diag - 2.0 * pot
            j = int(np.argmin(crit))
            score = float(crit[j])
        else:
            if k == 1:
                a_all = np.ones(len(cs))
                A, B = pot, diag
            else:
                A = Q - R + pot - S
                B = Q - 2.0 * S + diag
                with np.errstate(divide="ignore", invalid="ignore"):
                    a_all = np.where(B > ALPHA_ZERO_TOL * cs.kbar_c, np.clip(A / B, 0.0, 1.0), 0.0)
                if np.all(a_all <= ALPHA_ZERO_TOL):
                    status = "all_alpha_zero"
                    break
            crit = a_all**2 * B - 2.0 * a_all * A
            j = int(np.argmin(crit))
            alpha = float(a_all[j])
            score = float(crit[j])
        col = cs.column(j)
        if resampling:
            kvec = kernel.column(atoms.points[: atoms.n], cs.points[j])
        else:
            kvec = col[atoms.idx] if atoms.n else np.zeros(0)
        R = (1.0 - alpha) * R + alpha * pot[j]
        Q = (1.0 - alpha) ** 2 * Q + 2.0 * alpha * (1.0 - alpha) * S[j] + alpha**2 * diag[j]
        S = (1.0 - alpha) * S + alpha * col
        atoms.w[: atoms.n] *= 1.0 - alpha
        atoms.add(cs.points[j], kvec, diag[j], pot[j], -1 if resampling else j)
        atoms.w[atoms.n - 1] = alpha
        selected.append(j)
        sel_pts.append(cs.points[j])
        distinct.add(j)
        elapsed = clock.elapsed()
        with clock.paused():
            if audit_every and k % audit_every == 0:
                _audit(k, cs, atoms, S, Q, R)
            size = atoms.n if resampling else len(distinct)
            trace.append(
                IterationRecord(k, j, float(alpha), atoms.mmd2(E), Q - 2.0 * R + E, size, elapsed, score)
            )
    return RunResult(
        name or kind, atoms.measure(), trace, np.array(selected, dtype=int),
        np.array(sel_pts).reshape(-1, cs.dim), status,
    )


def kh_predefined(cs, n, step_rule="inv_k", source=None, audit_every=10):
    """Kernel herding with a predefined step-size sequence with steps ``alpha_k`` fixed in advance."""
    steps = step_sequence(step_rule, n)
    label = step_rule if isinstance(step_rule, str) else "custom"
    return _one_step_ahead("kh", cs, n, steps, source, audit_every, f"kh_{label}")


def kh_optimal(cs, n, source=None, audit_every=10):
    """Kernel herding with line-searched steps.

    Stops early, returning the previous measure, when the optimal step is 0.
    """
    return _one_step_ahead("kh_opt", cs, n, None, source, audit_every, "kh_optimal")


def gm_predefined(cs, n, step_rule="inv_k", source=None, audit_every=10):
    """Greedy one-step-ahead MMD minimisation with predefined steps."""
    steps = step_sequence(step_rule, n)
    label = step_rule if isinstance(step_rule, str) else "custom"
    return _one_step_ahead("gm", cs, n, steps, source, audit_every, f"gm_{label}")


def gm_optimal(cs, n, source=None, audit_every=10):
    """Greedy MMD minimisation over (point, step) jointly."""
    return _one_step_ahead("gm_opt", cs, n, None, source, audit_every, "gm_optimal")


def kh_iwo(cs, n, variant="ii_sum_one", stop_rules=True, qp_tol=1e-10):
    """Kernel herding with weights re-optimised at every iteration.

    ``variant`` selects the weights: ``i_simplex`` (fully corrective),
    ``ii_sum_one`` or ``iii_unconstrained``. With ``stop_rules`` the early
    exits for the sum-to-one and unconstrained variants are applied.
    """
    if variant not in ("i_simplex", "ii_sum_one", "iii_unconstrained"):
        raise ValueError(f"unknown IWO variant {variant!r}")
    _check_kernel(cs)
    C, E = len(cs), cs.energy
    pot = cs.pot
    atoms = _Atoms(cs.dim)
    g = GramState(cs.kbar_c)
    cols = np.zeros((max(n, 1), C))
    S = np.zeros(C)
    in_support = np.zeros(C, dtype=bool)
    skipped = np.zeros(C, dtype=bool)
    trace, selected = [], []
    status = "completed"
    w = np.zeros(0)
    prev = None
    clock = _Clock()
    for k in range(1, n + 1):
        v = S - pot
        # On the support v equals 0 (variant iii) or the constant v(x_{k-1})
        # (variant ii) in exact arithmetic, so the stopping rules only scan
        # the other candidates and are not decided by round-off there.
        outside = ~in_support
        vmin = float(v[outside].min()) if np.any(outside) else np.inf
        if k > 1:
            if stop_rules and variant == "ii_sum_one" and vmin >= v[prev]:
                status = "stop_rule_ii"
                break
            if stop_rules and variant == "iii_unconstrained" and vmin >= 0.0:
                status = "stop_rule_iii"
                break
            if variant == "i_simplex" and vmin >= float(w @ v[atoms.idx]):
                status = "fw_gap_zero"
                break
        eligible = outside & ~skipped
        j = None
        while np.any(eligible):
            cand = int(np.argmin(np.where(eligible, v, np.inf)))
            col = cs.column(cand)
            try:
                g.extend(col[atoms.idx], cs.diag[cand])
            except NearDuplicateError:
                skipped[cand] = True
                eligible[cand] = False
                continue
            j = cand
            break
        if j is None:
            status = "exhausted"
            break
        cols[atoms.n] = col
        atoms.add(cs.points[j], col[atoms.idx], cs.diag[j], pot[j], j)
        in_support[j] = True
        p_sup = atoms.pot[: atoms.n]
        if variant == "iii_unconstrained":
            w = np.asarray(tilde_weights(g, p_sup))
            y = g.forward(p_sup)
            rec = E - float(y @ y)
        elif variant == "ii_sum_one":
            w = np.asarray(hat_weights(g, p_sup))
            y = g.forward(p_sup)
            rec = E - float(y @ y) + (1.0 - float(y @ g.l1)) ** 2 / g.one_kinv_one
        else:
            w0 = np.append(w, 0.0)
            w = np.asarray(simplex_weights(atoms.gram[: atoms.n, : atoms.n], p_sup, qp_tol, w0=w0 if k > 1 else None))
        atoms.w[: atoms.n] = w
        S = w @ cols[: atoms.n]
        if variant == "i_simplex":
            rec = float(w @ S[atoms.idx]) - 2.0 * float(w @ p_sup) + E
        selected.append(j)
        prev = j
        elapsed = clock.elapsed()
        with clock.paused():
            trace.append(
                IterationRecord(k, j, float("nan"), atoms.mmd2(E), rec, atoms.n, elapsed, vmin)
            )
    return RunResult(
        f"kh_iwo_{variant.split('_')[0]}", atoms.measure(), trace, np.array(selected, dtype=int),
        cs.points[np.array(selected, dtype=int)], status, g.floor_hits,
    )


def sbq(cs, n, variant="unconstrained"):
    """Sequential Bayesian quadrature.

    ``unconstrained`` maximises the decrease of MMD^2 under K^{-1}p weights,
    ``sum_one`` does the same under sum-to-one weights using a factor of the
    reduced-kernel Gram, and ``coord_descent`` keeps previous weights fixed and
    optimises only the new one.
    """
    if variant not in ("unconstrained", "sum_one", "coord_descent"):
        raise ValueError(f"unknown SBQ variant {variant!r}")
    _check_kernel(cs)
    if variant == "coord_descent":
        return _sbq_cd(cs, n)
    C, E = len(cs), cs.energy
    pot, diag = cs.pot, cs.diag
    reduced = variant == "sum_one"
    if reduced:
        dmu = cs.reduced_diag()
        g = GramState(cs.kmu_bar_c, C)
    else:
        g = GramState(cs.kbar_c, C)
        St = np.zeros(C)
        y = []
    atoms = _Atoms(cs.dim)
    skipped = np.zeros(C, dtype=bool)
    trace, selected = [], []
    status = "completed"
    rec = E
    clock = _Clock()
    for k in range(1, n + 1):
        if reduced:
            den = dmu - g.q
            num = (g.s - 1.0) ** 2
        else:
            den = diag - g.q
            num = (St - pot) ** 2
        ok = (den > g.beta_floor) & ~skipped
        j = None
        while np.any(ok):
            with np.errstate(divide="ignore", invalid="ignore"):
                score = np.where(ok, num / den, -np.inf)
            cand = int(np.argmax(score))
            col = cs.column(cand)
            if reduced:
                rcol = col - pot - pot[cand] + E
                args = (rcol[atoms.idx], dmu[cand], rcol)
            else:
                args = (col[atoms.idx], diag[cand], col)
            try:
                g.extend(*args)
            except NearDuplicateError:
                skipped[cand] = True
                ok[cand] = False
                continue
            j = cand
            break
        if j is None:
            status = "exhausted"
            break
        atoms.add(cs.points[j], col[atoms.idx], diag[j], pot[j], j)
        m = g.n
        if reduced:
            rec = 1.0 / g.one_kinv_one
        else:
            L = g.L
            y_new = (pot[j] - L[m - 1, : m - 1] @ np.asarray(y)) / L[m - 1, m - 1]
            y.append(y_new)
            St += y_new * g.cand_factor[m - 1]
            rec -= y_new**2
        selected.append(j)
        elapsed = clock.elapsed()
        with clock.paused():
            # weights are only needed for the output and the direct MMD^2
            if reduced:
                w = g.solve(np.ones(m))
                w /= w.sum()
            else:
                w = g.solve(atoms.pot[:m])
            atoms.w[:m] = w
            trace.append(
                IterationRecord(k, j, float("nan"), atoms.mmd2(E), rec, m, elapsed, float(score[j]))
            )
    return RunResult(
        f"sbq_{variant}", atoms.measure(), trace, np.array(selected, dtype=int),
        cs.points[np.array(selected, dtype=int)], status, g.floor_hits,
    )


def _sbq_cd(cs, n):
    C, E = len(cs), cs.energy
    pot, diag = cs.pot, cs.diag
    atoms = _Atoms(cs.dim)
    pos = {}
    S = np.zeros(C)
    rec = E
    trace, selected = [], []
    clock = _Clock()
    for k in range(1, n + 1):
        score = (S - pot) ** 2 / diag
        j = int(np.argmax(score))
        wj = (pot[j] - S[j]) / diag[j]
        col = cs.column(j)
        S = S + wj * col
        rec -= float(score[j])
        if j not in pos:
            pos[j] = atoms.n
            atoms.add(cs.points[j], col[atoms.idx], diag[j], pot[j], j)
        atoms.w[pos[j]] += wj
        selected.append(j)
        elapsed = clock.elapsed()
        with clock.paused():
            trace.append(
                IterationRecord(k, j, float(wj), atoms.mmd2(E), rec, atoms.n, elapsed, float(score[j]))
            )
    return RunResult(
        "sbq_coord_descent", atoms.measure(), trace, np.array(selected, dtype=int),
        cs.points[np.array(selected, dtype=int)],
    )


def iid_baseline(target, kernel, n_max, repetitions, seed=0):
    """MMD^2 of empirical measures of iid samples from ``target``.

    Returns ``(mean, sd)`` arrays over repetitions for n = 1..n_max.
    """
    kernel.require_spd("iid baseline")
    if not getattr(target, "samplable", False):
        raise ValueError(f"target {target.variant!r} cannot be sampled")
    E = target.energy(kernel)
    rng = np.random.default_rng(seed)
    ns = np.arange(1, n_max + 1, dtype=float)
    out = np.empty((repetitions, n_max))
    for r in range(repetitions):
        X = target.sample(n_max, rng)
        G = kernel.gram(X, X)
        p = target.potential(kernel, X)
        # 1^T K_n 1 for every prefix n
        row = np.cumsum(np.tril(G), axis=1)[np.arange(n_max), np.arange(n_max)]
        quad = np.cumsum(2.0 * row - np.diag(G))
        out[r] = quad / ns**2 - 2.0 * np.cumsum(p) / ns + E
    return out.mean(axis=0), out.std(axis=0, ddof=1) if repetitions > 1 else np.zeros(n_max)


def olwo_postprocess(points, target, kernel, constraint="sum_one", qp_tol=1e-10):
    """MMD^2 of the optimally re-weighted prefixes of a support sequence.

    Prefix points whose Schur complement falls below the floor (repeats) are
    skipped and the previous value is carried forward.
    """
    if constraint not in ("simplex", "sum_one", "unconstrained"):
        raise ValueError(f"unknown constraint class {constraint!r}")
    points = np.asarray(points, dtype=float)
    E = target.energy(kernel)
    p_all = target.potential(kernel, points)
    g = GramState(kernel.kbar or 1.0)
    keep = []
    out = np.empty(points.shape[0])
    w = None
    last = E
    for i in range(points.shape[0]):
        col = kernel.column(points[keep], points[i]) if keep else np.zeros(0)
        try:
            g.extend(col, kernel.eval(points[i], points[i]))
        except NearDuplicateError:
            out[i] = last
            continue
        keep.append(i)
        p = p_all[keep]
        if constraint == "unconstrained":
            y = g.forward(p)
            last = E - float(y @ y)
        elif constraint == "sum_one":
            y = g.forward(p)
            last = E - float(y @ y) + (1.0 - float(y @ g.l1)) ** 2 / g.one_kinv_one
        else:
            K = g.gram()
            w0 = None if w is None else np.append(w, 0.0)
            w = np.asarray(simplex_weights(K, p, qp_tol, w0=w0))
            last = float(w @ K @ w - 2.0 * w @ p + E)
        out[i] = last
    return out


ONE_STEP_METHODS = ("kh_predefined", "kh_optimal", "gm_predefined", "gm_optimal")

METHODS = {
    "kh_predefined": kh_predefined,
    "kh_optimal": kh_optimal,
    "kh_iwo": kh_iwo,
    "gm_predefined": gm_predefined,
    "gm_optimal": gm_optimal,
    "sbq": sbq,
}


def run_method(method, cs, n, step_rule="inv_k", variant=None, source=None, audit_every=10):
    """Dispatch by method name with the options each method accepts."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {sorted(METHODS)}")
    if source is not None and source.resample_each_iteration and method not in ONE_STEP_METHODS:
        raise ValueError(f"candidate resampling is only supported by {ONE_STEP_METHODS}")
    if method in ("kh_predefined", "gm_predefined"):
        return METHODS[method](cs, n, step_rule, source=source, audit_every=audit_every)
    if method in ("kh_optimal", "gm_optimal"):
        return METHODS[method](cs, n, source=source, audit_every=audit_every)
    if method == "kh_iwo":
        return kh_iwo(cs, n, variant or "ii_sum_one")
    return sbq(cs, n, variant or "unconstrained")
