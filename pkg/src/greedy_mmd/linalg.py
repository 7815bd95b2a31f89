"""Incremental Gram factorisations and optimal quadrature weights.

The Gram matrix K_n of the current support is kept as a lower Cholesky factor
L_n, extended by one row per new point in O(n^2). When candidate tracking is
enabled the state also carries, for every candidate x^(i),

    c_i = L_n^{-1} k_n(x^(i)),   q_i = k_n^T K_n^{-1} k_n = |c_i|^2,
    s_i = 1^T K_n^{-1} k_n = (L_n^{-1} 1)^T c_i,

which are updated with one new row of ``c`` per extension, so SBQ scores never
need a solve against K_n.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

__all__ = [
    "NearDuplicateError",
    "QPNotConverged",
    "GramState",
    "WeightVector",
    "tilde_weights",
    "hat_weights",
    "simplex_weights",
    "certified_mc2",
    "BETA_FLOOR_REL",
]

BETA_FLOOR_REL = 1e-12


class NearDuplicateError(ValueError):
    """Schur complement of a new point is below the floor; skip the point."""


class QPNotConverged(RuntimeError):
    def __init__(self, msg, weights, gap):
        super().__init__(msg)
        self.weights = weights
        self.gap = gap


class WeightVector(np.ndarray):
    """ndarray of weights tagged with its constraint class."""

    def __new__(cls, values, constraint_class):
        obj = np.asarray(values, dtype=float).view(cls)
        obj.constraint_class = constraint_class
        return obj

    def __array_finalize__(self, obj):
        self.constraint_class = getattr(obj, "constraint_class", "unconstrained")


class GramState:
    """Cholesky factor of a growing Gram matrix.

    Parameters
    ----------
    kbar : float
        Scale of the kernel diagonal; the Schur-complement floor is
        ``1e-12 * kbar``.
    n_candidates : int, optional
        Track the per-candidate recursions for this many candidates.
    capacity : int
        Initial allocation, grown by doubling.
    """

    def __init__(self, kbar=1.0, n_candidates=None, capacity=32):
        self.beta_floor = BETA_FLOOR_REL * kbar
        self.kbar = kbar
        self.n = 0
        self._L = np.zeros((capacity, capacity))
        self._l1 = np.zeros(capacity)  # L^{-1} 1
        self.one_kinv_one = 0.0
        self.n_candidates = n_candidates
        if n_candidates is not None:
            self._c = np.zeros((capacity, n_candidates))
            self.q = np.zeros(n_candidates)
            self.s = np.zeros(n_candidates)
        self.floor_hits = 0

    @property
    def L(self):
        return self._L[: self.n, : self.n]

    @property
    def l1(self):
        return self._l1[: self.n]

    @property
    def cand_factor(self):
        """Rows of L^{-1} K(support, candidates)."""
        return self._c[: self.n]

    def _grow(self):
        cap = self._L.shape[0]
        L = np.zeros((2 * cap, 2 * cap))
        L[:cap, :cap] = self._L
        self._L = L
        self._l1 = np.concatenate([self._l1, np.zeros(cap)])
        if self.n_candidates is not None:
            self._c = np.concatenate([self._c, np.zeros((cap, self.n_candidates))])

    def forward(self, b):
        """L^{-1} b."""
        if self.n == 0:
            return np.zeros(0)
        return solve_triangular(self.L, b, lower=True, check_finite=False)

    def solve(self, b):
        """K_n^{-1} b."""
        if self.n == 0:
            return np.zeros(0)
        return cho_solve((self.L, True), b, check_finite=False)

    def schur(self, column, diag):
        """Schur complement ``diag - k^T K_n^{-1} k`` and ``L^{-1} k``."""
        v = self.forward(np.asarray(column, dtype=float))
        return diag - float(v @ v), v

    def extend(self, column, diag, cand_row=None):
        """Append a point with Gram column ``column`` and diagonal ``diag``.

        ``cand_row`` holds K(x_new, x^(i)) for every tracked candidate.
        Returns the Schur complement 1 / beta_{n+1}.
        """
        n = self.n
        column = np.asarray(column, dtype=float)
        if column.shape != (n,):
            raise ValueError(f"column must have length {n}")
        sc, v = self.schur(column, diag)
        if not sc > self.beta_floor:
            self.floor_hits += 1
            raise NearDuplicateError(f"Schur complement {sc:.3e} below floor {self.beta_floor:.3e}")
        if n == self._L.shape[0]:
            self._grow()
        r = np.sqrt(sc)
        self._L[n, :n] = v
        self._L[n, n] = r
        # row check: the new row of L L^T must reproduce [column, diag]
        recon = self._L[n, : n + 1] @ self._L[: n + 1, : n + 1].T
        err = np.max(np.abs(recon - np.append(column, diag)))
        if err > 1e-10 * (n + 1) * max(self.kbar, abs(diag)):
            raise FloatingPointError(f"Cholesky row reconstruction error {err:.3e}")
        l1_new = (1.0 - v @ self._l1[:n]) / r
        self._l1[n] = l1_new
        self.one_kinv_one += l1_new**2
        if self.n_candidates is not None:
            if cand_row is None:
                raise ValueError("cand_row is required when candidates are tracked")
            z = (np.asarray(cand_row, dtype=float) - v @ self._c[:n]) / r
            self._c[n] = z
            self.q += z * z
            self.s += l1_new * z
        self.n = n + 1
        return sc

    def beta_u(self):
        """(beta_n, u_n) of the last extension, from the block-inverse formula."""
        n = self.n
        if n < 2:
            return 1.0 / self._L[0, 0] ** 2, np.zeros(0)
        L_prev = self._L[: n - 1, : n - 1]
        v = self._L[n - 1, : n - 1]
        u = solve_triangular(L_prev.T, v, lower=False)
        return 1.0 / self._L[n - 1, n - 1] ** 2, u

    def gram(self):
        return self.L @ self.L.T

    @classmethod
    def from_gram(cls, K, kbar=1.0, cand_block=None):
        """Factorise a full Gram matrix (used for refactorisation)."""
        K = np.asarray(K, dtype=float)
        n = K.shape[0]
        state = cls(kbar, None if cand_block is None else cand_block.shape[1], capacity=max(n, 1))
        state._L[:n, :n] = np.linalg.cholesky(K)
        state.n = n
        state._l1[:n] = state.forward(np.ones(n))
        state.one_kinv_one = float(state._l1[:n] @ state._l1[:n])
        if cand_block is not None:
            c = state.forward(cand_block)
            state._c[:n] = c
            state.q = np.sum(c * c, axis=0)
            state.s = state._l1[:n] @ c
        return state


def tilde_weights(g: GramState, p) -> WeightVector:
    """Unconstrained minimiser of w^T K w - 2 w^T p: K w = p."""
    return WeightVector(g.solve(np.asarray(p, dtype=float)), "unconstrained")


def hat_weights(g: GramState, p) -> WeightVector:
    """Minimiser of w^T K w - 2 w^T p subject to sum(w) = 1."""
    p = np.asarray(p, dtype=float)
    a = g.solve(np.ones(g.n))
    b = g.solve(p)
    w = b + (1.0 - b.sum()) / a.sum() * a
    return WeightVector(w, "sum_one")


def _fw_gap(K, p, w):
    grad = K @ w - p
    return 2.0 * (w @ grad - grad.min()), grad


def simplex_weights(K, p, tol=1e-10, w0=None, max_iter=100_000) -> WeightVector:
    """Minimise w^T K w - 2 w^T p over the probability simplex.

    Primal active-set iterations, each solving the sum-to-one problem on the
    current face exactly; the result is certified by the Frank-Wolfe duality
    gap ``max_v (w - v)^T grad f(w) <= tol``.

    Raises
    ------
    QPNotConverged
        If ``max_iter`` face changes pass without reaching ``tol``; carries the
        best iterate and its gap.
    """
    K = np.asarray(K, dtype=float)
    p = np.asarray(p, dtype=float)
    n = p.shape[0]
    if n == 1:
        return WeightVector([1.0], "simplex")
    if w0 is None:
        start = int(np.argmin(np.diag(K) - 2.0 * p))
        w = np.zeros(n)
        w[start] = 1.0
    else:
        w = np.clip(np.asarray(w0, dtype=float), 0.0, None)
        w /= w.sum()
    free = list(np.flatnonzero(w > 0))
    best_gap = np.inf
    for _ in range(max_iter):
        idx = np.array(free)
        KF = K[np.ix_(idx, idx)]
        fac = cho_factor(KF, lower=True, check_finite=False)
        a = cho_solve(fac, np.ones(idx.size), check_finite=False)
        b = cho_solve(fac, p[idx], check_finite=False)
        wF = b + (1.0 - b.sum()) / a.sum() * a
        if np.all(wF >= 0.0):
            w = np.zeros(n)
            w[idx] = wF
            gap, grad = _fw_gap(K, p, w)
            best_gap = min(best_gap, gap)
            if gap <= tol:
                return WeightVector(w, "simplex")
            j = int(np.argmin(grad))
            if j in free:
                # gap is pure round-off on the face; nothing left to add
                return WeightVector(w, "simplex")
            free.append(j)
            continue
        # move toward the face optimum until the first weight hits zero
        cur = w[idx]
        d = wF - cur
        neg = d < 0
        ratios = np.full(idx.size, np.inf)
        ratios[neg] = cur[neg] / -d[neg]
        t = min(1.0, ratios.min())
        new = cur + t * d
        new[ratios <= t] = 0.0
        w = np.zeros(n)
        w[idx] = np.clip(new, 0.0, None)
        w /= w.sum()
        free = [i for i in free if w[i] > 0]
    gap, _ = _fw_gap(K, p, w)
    raise QPNotConverged(f"simplex QP gap {gap:.3e} > {tol:.1e} after {max_iter} iterations", w, gap)


def _reduced_matvec(cs, omega, chunk=1 << 22):
    """K_mu,C @ omega for a weight vector with total mass one."""
    X = cs.points
    rows = max(1, chunk // X.shape[0])
    kw = np.empty(X.shape[0])
    nz = np.flatnonzero(omega)
    for start in range(0, X.shape[0], rows):
        kw[start:start + rows] = cs.kernel.gram(X[start:start + rows], X[nz]) @ omega[nz]
    return kw - cs.pot - float(cs.pot @ omega) + cs.energy


def certified_mc2(cs, budget=2000, tol=0.0):
    """Bracket M_C^2 = min over the simplex of omega^T K_mu,C omega.

    Frank-Wolfe with away steps and exact line search, started from uniform
    weights, matrix-free (one kernel column per iteration). Returns
    ``(lower, upper, omega)`` where ``upper = f(omega)`` and
    ``lower = max(0, f(omega) - gap)`` with ``gap`` the duality gap; both ends
    are recomputed exactly from ``omega`` at the end.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    C = len(cs)
    kmu_diag = cs.reduced_diag()
    if C == 1:
        v = float(kmu_diag[0])
        return v, v, np.ones(1)
    omega = np.full(C, 1.0 / C)
    h = _reduced_matvec(cs, omega)
    f = float(omega @ h)
    for _ in range(budget):
        j = int(np.argmin(h))
        wh = float(omega @ h)
        fw_gain = wh - h[j]
        supp = np.flatnonzero(omega > 0)
        a = int(supp[np.argmax(h[supp])])
        away_gain = h[a] - wh
        if max(fw_gain, away_gain) <= tol:
            break
        if fw_gain >= away_gain:
            col = cs.column(j) - cs.pot - cs.pot[j] + cs.energy
            dh = col - h
            curv = kmu_diag[j] - 2.0 * h[j] + f
            gmax = 1.0
            slope = h[j] - wh
            if curv <= 0:
                break
            gamma = min(gmax, -slope / curv)
            omega *= 1.0 - gamma
            omega[j] += gamma
        else:
            col = cs.column(a) - cs.pot - cs.pot[a] + cs.energy
            dh = h - col
            curv = f - 2.0 * h[a] + kmu_diag[a]
            gmax = omega[a] / (1.0 - omega[a])
            slope = wh - h[a]
            if curv <= 0:
                break
            gamma = min(gmax, -slope / curv)
            omega *= 1.0 + gamma
            omega[a] -= gamma
            if gamma == gmax:
                omega[a] = 0.0
        h = h + gamma * dh
        f = f + 2.0 * gamma * slope + gamma**2 * curv
    omega = np.clip(omega, 0.0, None)
    omega /= omega.sum()
    h = _reduced_matvec(cs, omega)
    upper = float(omega @ h)
    gap = 2.0 * (upper - float(h.min()))
    lower = max(0.0, upper - gap)
    return lower, upper, omega
