"""Fitting algorithms for the six penalty structures plus the shrink-to-target
wrapper and a unified entry point.

Every solver minimizes ``0.5 * ||Y - B Z||_F^2 + lambda * penalty(B)`` on a
centered design, with the structure's Table weights folded into per-group
thresholds.  Internally the solvers work with the Gram matrices ``S = Z Z'``
and ``C0 = Y Z'`` so iteration cost does not grow with the sample length.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    CoefficientSet,
    LaggedDesign,
    VarxSpec,
    build_lagged_design,
    least_squares_objective,
    recover_intercept,
)
from .penalties import Group, GroupPartition, PenaltyStructure, group_partition, penalty_value

__all__ = [
    "SolverOptions",
    "MinnesotaTarget",
    "FitResult",
    "soft_threshold",
    "power_method_max_eig",
    "trust_region_group_update",
    "hierarchical_prox",
    "DesignOps",
    "fit_basic",
    "fit_lag_group",
    "fit_own_other",
    "fit_sparse_group",
    "fit_endogenous_first",
    "fit_design",
    "fit",
    "kkt_max_violation",
]


@dataclass
class SolverOptions:
    """Convergence controls shared by all solvers.

    ``tol`` bounds the maximum absolute coefficient change over a full pass;
    ``warm_start`` may be a coefficient matrix or a CoefficientSet.
    """

    tol: float = 1e-4
    max_iter: int = 1000
    warm_start: object | None = None
    active_set: bool = True

    def __post_init__(self) -> None:
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass(frozen=True)
class MinnesotaTarget:
    """Constant matrices the coefficients are shrunk toward instead of zero."""

    C_y: np.ndarray
    C_x: np.ndarray

    @classmethod
    def random_walk(cls, spec: VarxSpec) -> "MinnesotaTarget":
        """The vector-random-walk target: identity at lag one, zero elsewhere."""
        C_y = np.zeros((spec.k, spec.k * spec.p))
        C_y[:, : spec.k] = np.eye(spec.k)
        return cls(C_y=C_y, C_x=np.zeros((spec.k, spec.m * spec.s)))

    def matrix(self, spec: VarxSpec) -> np.ndarray:
        C_y = np.atleast_2d(np.asarray(self.C_y, dtype=float))
        C_x = np.asarray(self.C_x, dtype=float).reshape(spec.k, spec.m * spec.s)
        if C_y.shape != (spec.k, spec.k * spec.p):
            raise ValueError("C_y must have shape (k, k*p)")
        return np.hstack([C_y, C_x])


@dataclass
class FitResult:
    coeffs: CoefficientSet
    objective: float
    iterations: int
    sparsity_ratio: float
    active_groups: list[int]
    converged: bool
    lam: float
    structure: PenaltyStructure


def soft_threshold(x: float, phi: float) -> float:
    """sgn(x) * max(|x| - phi, 0)."""
    if phi < 0:
        raise ValueError("phi must be >= 0")
    return float(np.sign(x) * max(abs(x) - phi, 0.0))


def _st(x: np.ndarray, phi: float) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - phi, 0.0)


def power_method_max_eig(
    S: np.ndarray,
    warm_vector: np.ndarray | None = None,
    tol: float = 1e-12,
    max_iter: int = 100000,
) -> tuple[float, np.ndarray]:
    """Dominant eigenvalue and eigenvector of a symmetric PSD matrix.

    The returned eigenvector warm-starts subsequent calls on nearby matrices,
    which keeps repeated step-size computations cheap inside rolling fits.
    """
    S = np.atleast_2d(np.asarray(S, dtype=float))
    n = S.shape[0]
    if S.shape != (n, n):
        raise ValueError("S must be square")
    if not np.any(S):
        v = np.zeros(n)
        v[0] = 1.0
        return 0.0, v
    if warm_vector is not None and np.linalg.norm(warm_vector) > 0:
        v = np.asarray(warm_vector, dtype=float).copy()
    else:
        # deterministic, non-degenerate start
        v = 1.0 + 1e-3 * np.arange(n)
    v /= np.linalg.norm(v)
    eig = 0.0
    for _ in range(max_iter):
        w = S @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0, v
        v_new = w / nw
        eig_new = float(v_new @ (S @ v_new))
        if abs(eig_new - eig) <= tol * max(abs(eig_new), 1.0):
            return eig_new, v_new
        v, eig = v_new, eig_new
    return eig, v


def _radius_root(v: np.ndarray, p2: np.ndarray, lam: float, init: float) -> float:
    """Positive root of 1 - 1/||y(delta)|| where ||y||^2 = sum p2 / (v*delta + lam)^2.

    Safeguarded Newton: iterates stay inside an expanding bracket and fall back
    to bisection whenever a Newton step leaves it.
    """
    keep = p2 > 0
    v = v[keep]
    p2 = p2[keep]
    if v.size == 0 or not np.any(v * p2 > 0):
        return 0.0
    delta = init if np.isfinite(init) and init > 0 else 1.0
    lo, hi = 0.0, np.inf
    for _ in range(100):
        den = v * delta + lam
        n2 = float(np.sum(p2 / den**2))
        norm = np.sqrt(n2)
        omega = 1.0 - 1.0 / norm
        if abs(omega) < 1e-13:
            return delta
        if omega > 0:
            lo = delta
        else:
            hi = delta
        dn2 = -2.0 * float(np.sum(p2 * v / den**3))
        domega = 0.5 * n2 ** (-1.5) * dn2
        step = delta - omega / domega if domega != 0 else np.inf
        if lo < step < hi:
            delta = step
        elif np.isinf(hi):
            delta = 2.0 * max(delta, lo, 1e-300)
        else:
            delta = 0.5 * (lo + hi)
        if np.isfinite(hi) and (hi - lo) <= 1e-15 * max(hi, 1.0):
            return 0.5 * (lo + hi)
    # bisection fallback
    if np.isinf(hi):
        hi = max(delta, 1.0)
        while 1.0 - 1.0 / np.sqrt(float(np.sum(p2 / (v * hi + lam) ** 2))) > 0:
            hi *= 2.0
            if hi > 1e30:
                return hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if 1.0 - 1.0 / np.sqrt(float(np.sum(p2 / (v * mid + lam) ** 2))) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def trust_region_group_update(
    G_eigvals: np.ndarray,
    G_eigvecs: np.ndarray,
    r_q: np.ndarray,
    lam: float,
) -> np.ndarray:
    """Solve one active group subproblem via its trust-region form.

    Given the eigendecomposition of the group Gram matrix and the (negative)
    partial-residual correlation ``r_q``, finds the radius where the scaled
    ridge solution has unit norm and returns ``-(G + (lambda/delta) I)^{-1} r_q``.
    """
    v = np.asarray(G_eigvals, dtype=float)
    W = np.atleast_2d(np.asarray(G_eigvecs, dtype=float))
    r = np.asarray(r_q, dtype=float).ravel()
    proj = W.T @ r
    rnorm = float(np.linalg.norm(r))
    if rnorm <= lam:
        raise ValueError("group must be screened active: ||r_q|| > lambda required")
    delta = _radius_root(v, proj**2, lam, rnorm / lam if lam > 0 else 1.0)
    y = -proj / (v * delta + lam)
    return delta * (W @ y)


def hierarchical_prox(v: np.ndarray, lam_step: float, k: int, m: int) -> np.ndarray:
    """Exact prox of the nested one-lag penalty lam*(||v|| + ||v_exog||).

    One pass of block shrinkage suffices: the inner exogenous block first,
    then the full block.
    """
    v = np.asarray(v, dtype=float).copy()
    if v.shape != (k + m,):
        raise ValueError(f"v must have length k + m = {k + m}")
    if lam_step < 0:
        raise ValueError("lam_step must be >= 0")
    if m > 0:
        nx = np.linalg.norm(v[k:])
        v[k:] *= max(1.0 - lam_step / nx, 0.0) if nx > 0 else 0.0
    nfull = np.linalg.norm(v)
    v *= max(1.0 - lam_step / nfull, 0.0) if nfull > 0 else 0.0
    return v


# ---------------------------------------------------------------------------
# shared per-design workspace


class DesignOps:
    """Gram-space quantities of one design, cached for reuse across penalty
    values and solver structures."""

    def __init__(self, design: LaggedDesign, sigma_warm: dict | None = None):
        if not design.centered:
            raise ValueError("solvers require a centered design")
        self.design = design
        self.S = design.Z @ design.Z.T
        self.C0 = design.Y @ design.Z.T
        self._eig_cache: dict = {}
        self._sigma_cache: dict = {}
        self._sigma_warm = sigma_warm
        self._warned_degenerate = False

    def eig_block(self, cols: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        key = tuple(int(c) for c in cols)
        hit = self._eig_cache.get(key)
        if hit is None:
            sub = self.S[np.ix_(cols, cols)]
            vals, vecs = np.linalg.eigh(sub)
            vals = np.maximum(vals, 0.0)
            hit = (vals, vecs)
            self._eig_cache[key] = hit
        return hit

    def sigma1_block(self, cols: np.ndarray) -> float:
        key = tuple(int(c) for c in cols)
        hit = self._sigma_cache.get(key)
        if hit is not None:
            return hit[0]
        warm = self._sigma_warm.get(key) if self._sigma_warm is not None else None
        sub = self.S[np.ix_(cols, cols)]
        eig, vec = power_method_max_eig(sub, warm_vector=warm)
        self._sigma_cache[key] = (eig, vec)
        return eig

    def sigma1_full(self) -> float:
        return self.sigma1_block(np.arange(self.S.shape[0]))

    def carry_warm_vectors(self) -> dict:
        """Eigenvector warm starts to seed the next design's power iterations."""
        return {key: vec for key, (val, vec) in self._sigma_cache.items()}

    def warn_degenerate(self, what: str) -> None:
        if not self._warned_degenerate:
            warnings.warn(f"degenerate regressor block ({what}); coefficients pinned to zero")
            self._warned_degenerate = True


# ---------------------------------------------------------------------------
# runtime group representations for the block solvers


class _ColBlockGroup:
    """A group that is a full submatrix B[:, cols] (lag blocks, exogenous columns)."""

    def __init__(self, ops: DesignOps, group: Group):
        self.cols = np.asarray(group.cols, dtype=int)
        self.weight = group.weight
        self.Ssub = ops.S[np.ix_(self.cols, self.cols)]
        self.single = self.cols.size == 1
        self.s_scalar = float(self.Ssub[0, 0]) if self.single else 0.0
        if self.single:
            self.eigvals = self.Ssub[0].copy()
            self.eigvecs = np.ones((1, 1))
        else:
            self.eigvals, self.eigvecs = ops.eig_block(self.cols)
        self.size = self.cols.size * ops.C0.shape[0]
        self._ops = ops
        self._C0sel = ops.C0[:, self.cols]
        self._Ssel = ops.S[:, self.cols]

    def corr(self, B: np.ndarray) -> np.ndarray:
        # partial-residual correlation (Y - B_{-g} Z_{-g}) Z_g'
        return self._C0sel - B @ self._Ssel + B[:, self.cols] @ self.Ssub

    def get(self, B: np.ndarray) -> np.ndarray:
        return B[:, self.cols]

    def set(self, B: np.ndarray, vals: np.ndarray) -> None:
        B[:, self.cols] = vals

    def solve_active(self, c: np.ndarray, lam_g: float) -> np.ndarray:
        A = c @ self.eigvecs
        p2 = np.sum(A * A, axis=0)
        cn = np.linalg.norm(c)
        delta = _radius_root(self.eigvals, p2, lam_g, cn / lam_g)
        if delta <= 0.0:
            return np.zeros_like(c)
        return delta * (A / (self.eigvals * delta + lam_g)) @ self.eigvecs.T

    def solve_unpenalized(self, c: np.ndarray) -> np.ndarray:
        v, W = self.eigvals, self.eigvecs
        cutoff = max(v.max(initial=0.0), 0.0) * 1e-12
        inv = np.where(v > cutoff, 1.0 / np.maximum(v, cutoff if cutoff > 0 else 1.0), 0.0)
        return (c @ W) * inv @ W.T

    def lipschitz(self) -> float:
        return self._ops.sigma1_block(self.cols)

    def gram_mult(self, vals: np.ndarray) -> np.ndarray:
        return vals @ self.Ssub


class _RowBlockGroup:
    """A group of per-row index sets (diagonal and off-diagonal splits).

    Every row's block has the same size, so the blocks stack into 3-D arrays
    and the whole group updates in a handful of vectorized operations.
    """

    def __init__(self, ops: DesignOps, group: Group):
        rows = np.asarray(group.rows, dtype=int)
        cols = np.asarray(group.cols, dtype=int)
        order = np.argsort(rows, kind="stable")
        rows, cols = rows[order], cols[order]
        self.row_ids, counts = np.unique(rows, return_counts=True)
        if counts.size and not np.all(counts == counts[0]):
            raise ValueError("row blocks must have equal sizes")
        na = int(counts[0]) if counts.size else 0
        self.cols2d = cols.reshape(len(self.row_ids), na)
        self.weight = group.weight
        self.size = cols.size
        self._ops = ops
        self.colsflat = np.unique(cols)
        self.local2d = np.searchsorted(self.colsflat, self.cols2d)
        self._C0sel = ops.C0[:, self.colsflat]
        self._Ssel = ops.S[:, self.colsflat]
        self._rowsel = (self.row_ids[:, None], self.local2d)
        self.Ssub = np.stack(
            [ops.S[np.ix_(jc, jc)] for jc in self.cols2d]
        ) if na else np.zeros((0, 0, 0))
        eigs = [ops.eig_block(jc) for jc in self.cols2d]
        self.eigvals = np.stack([e[0] for e in eigs]) if eigs else np.zeros((0, 0))
        self.eigvecs = np.stack([e[1] for e in eigs]) if eigs else np.zeros((0, 0, 0))

    def corr(self, B: np.ndarray) -> np.ndarray:
        part = self._C0sel - B @ self._Ssel  # (k, n_distinct_cols)
        c = part[self._rowsel]
        c += np.einsum("ba,bac->bc", self.get(B), self.Ssub)
        return c

    def get(self, B: np.ndarray) -> np.ndarray:
        return B[self.row_ids[:, None], self.cols2d]

    def set(self, B: np.ndarray, vals: np.ndarray) -> None:
        B[self.row_ids[:, None], self.cols2d] = vals

    def solve_active(self, c: np.ndarray, lam_g: float) -> np.ndarray:
        proj = np.einsum("bai,ba->bi", self.eigvecs, c)
        cn = np.linalg.norm(c)
        delta = _radius_root(self.eigvals.ravel(), (proj**2).ravel(), lam_g, cn / lam_g)
        if delta <= 0.0:
            return np.zeros_like(c)
        y = proj / (self.eigvals * delta + lam_g)
        return delta * np.einsum("bai,bi->ba", self.eigvecs, y)

    def solve_unpenalized(self, c: np.ndarray) -> np.ndarray:
        v = self.eigvals
        cutoff = float(v.max(initial=0.0)) * 1e-12
        inv = np.where(v > cutoff, 1.0 / np.maximum(v, 1e-300), 0.0)
        proj = np.einsum("bai,ba->bi", self.eigvecs, c) * inv
        return np.einsum("bai,bi->ba", self.eigvecs, proj)

    def lipschitz(self) -> float:
        return float(self.eigvals.max(initial=0.0))

    def gram_mult(self, vals: np.ndarray) -> np.ndarray:
        return np.einsum("ba,bac->bc", vals, self.Ssub)


def _runtime_groups(ops: DesignOps, partition: GroupPartition) -> list:
    out = []
    for g in partition.groups:
        if g.rows is None:
            out.append(_ColBlockGroup(ops, g))
        else:
            out.append(_RowBlockGroup(ops, g))
    return out


# ---------------------------------------------------------------------------
# coordinate descent for the entrywise-L1 structure


def _basic_descent(ops: DesignOps, lam: float, opts: SolverOptions, B0: np.ndarray):
    S, C0 = ops.S, ops.C0
    diag = np.diag(S).copy()
    dead = diag <= 0.0
    if np.any(dead):
        ops.warn_degenerate("zero-variance regressor row")
    B = B0.copy()
    B[:, dead] = 0.0
    q = S.shape[0]
    all_cols = [j for j in range(q) if not dead[j]]

    def one_pass(cols) -> float:
        worst = 0.0
        for j in cols:
            c = C0[:, j] - B @ S[:, j] + B[:, j] * diag[j]
            new = _st(c, lam) / diag[j]
            ch = np.max(np.abs(new - B[:, j]))
            if ch > 0.0:
                B[:, j] = new
                if ch > worst:
                    worst = ch
        return worst

    it = 0
    converged = False
    while it < opts.max_iter:
        change = one_pass(all_cols)
        it += 1
        if change < opts.tol:
            converged = True
            break
        if opts.active_set:
            active = [j for j in all_cols if np.any(B[:, j] != 0.0)]
            while it < opts.max_iter and active:
                change = one_pass(active)
                it += 1
                if change < opts.tol:
                    break
    return B, it, converged


# ---------------------------------------------------------------------------
# block coordinate descent with trust-region group updates


def _group_bcd(ops: DesignOps, groups: list, lam: float, opts: SolverOptions, B0: np.ndarray):
    B = B0.copy()

    def update_group(g) -> float:
        old = g.get(B)
        c = g.corr(B)
        lam_g = g.weight * lam
        if lam == 0.0:
            new = g.solve_unpenalized(c)
        else:
            cn = np.sqrt(float(np.vdot(c, c)))
            if cn <= lam_g:
                new = np.zeros_like(old)
            elif getattr(g, "single", False):
                # one-column group: the shrink has a closed form
                new = ((1.0 - lam_g / cn) / g.s_scalar) * c
            else:
                new = g.solve_active(c, lam_g)
        ch = float(np.max(np.abs(new - old))) if old.size else 0.0
        if ch > 0.0:
            g.set(B, new)
        return ch

    def one_pass(idxs) -> tuple[float, tuple]:
        worst = 0.0
        active = []
        for i in idxs:
            ch = update_group(groups[i])
            if ch > worst:
                worst = ch
            if np.any(groups[i].get(B) != 0.0):
                active.append(i)
        return worst, tuple(active)

    all_idx = tuple(range(len(groups)))
    it = 0
    converged = False
    while it < opts.max_iter:
        change, active = one_pass(all_idx)
        it += 1
        if change < opts.tol:
            converged = True
            break
        if opts.active_set:
            while it < opts.max_iter and active:
                change, active = one_pass(active)
                it += 1
                if change < opts.tol:
                    break
    return B, it, converged


# ---------------------------------------------------------------------------
# proximal-gradient inner loop for the sparse (L1 + group) structures


def _sgl_prox(A: np.ndarray, l1: float, grp: float) -> np.ndarray:
    out = _st(A, l1)
    n = np.sqrt(float(np.vdot(out, out)))
    if n <= grp or n == 0.0:
        return np.zeros_like(out)
    return (1.0 - grp / n) * out


def _sgl_inner(g, c0: np.ndarray, lam: float, alpha: float, weight: float,
               x0: np.ndarray, tol: float, max_iter: int) -> np.ndarray:
    """Accelerated proximal descent on one group subproblem.

    Momentum j/(j+3); on an objective increase the momentum restarts and the
    step is retaken from the last accepted point, which keeps the subproblem
    objective non-increasing.
    """
    sigma = g.lipschitz()
    if sigma <= 0.0:
        return np.zeros_like(x0)
    d = 1.0 / sigma
    l1 = d * alpha * lam
    grp = d * (1.0 - alpha) * weight * lam
    pen_l1 = alpha * lam
    pen_grp = (1.0 - alpha) * weight * lam

    def fval(x: np.ndarray) -> float:
        quad = 0.5 * float(np.vdot(x, g.gram_mult(x))) - float(np.vdot(x, c0))
        return quad + pen_grp * np.sqrt(float(np.vdot(x, x))) + pen_l1 * float(np.abs(x).sum())

    x = x0.copy()
    y = x.copy()
    fx = fval(x)
    j = 1
    for _ in range(max_iter):
        z = _sgl_prox(y - d * (g.gram_mult(y) - c0), l1, grp)
        fz = fval(z)
        if fz > fx + 1e-12 * (abs(fx) + 1.0):
            z = _sgl_prox(x - d * (g.gram_mult(x) - c0), l1, grp)
            fz = fval(z)
            j = 1
        change = float(np.max(np.abs(z - x))) if z.size else 0.0
        y = z + (j / (j + 3.0)) * (z - x)
        x, fx = z, fz
        j += 1
        if change < tol:
            break
    return x


def _sparse_bcd(ops: DesignOps, groups: list, lam: float, alpha: float,
                opts: SolverOptions, B0: np.ndarray):
    B = B0.copy()
    inner_tol = 0.1 * opts.tol

    def update_group(g) -> float:
        old = g.get(B)
        c = g.corr(B)
        if lam > 0.0 and np.sqrt(float(np.vdot(c, c))) <= (1.0 - alpha) * g.weight * lam:
            new = np.zeros_like(old)
        elif getattr(g, "single", False) and g.s_scalar > 0.0:
            # scalar Gram: the sparse-group prox solves the subproblem exactly
            new = _sgl_prox(c, alpha * lam, (1.0 - alpha) * g.weight * lam) / g.s_scalar
        else:
            new = _sgl_inner(g, c, lam, alpha, g.weight, old, inner_tol, opts.max_iter)
        ch = float(np.max(np.abs(new - old))) if old.size else 0.0
        if ch > 0.0:
            g.set(B, new)
        return ch

    def one_pass(idxs) -> tuple[float, tuple]:
        worst = 0.0
        active = []
        for i in idxs:
            ch = update_group(groups[i])
            if ch > worst:
                worst = ch
            if np.any(groups[i].get(B) != 0.0):
                active.append(i)
        return worst, tuple(active)

    all_idx = tuple(range(len(groups)))
    it = 0
    converged = False
    while it < opts.max_iter:
        change, active = one_pass(all_idx)
        it += 1
        if change < opts.tol:
            converged = True
            break
        if opts.active_set:
            while it < opts.max_iter and active:
                change, active = one_pass(active)
                it += 1
                if change < opts.tol:
                    break
    return B, it, converged


# ---------------------------------------------------------------------------
# row-decoupled proximal descent for the nested endogenous-first structure


def _nested_prox_matrix(V: np.ndarray, tau: float, spec: VarxSpec) -> np.ndarray:
    """Apply the one-lag nested prox to every row and lag block of V."""
    out = V.copy()
    k, m = spec.k, spec.m
    for lag in range(1, spec.p + 1):
        ysl = slice((lag - 1) * k, lag * k)
        if lag <= spec.s and m > 0:
            xsl = slice(k * spec.p + (lag - 1) * m, k * spec.p + lag * m)
            nx = np.linalg.norm(out[:, xsl], axis=1)
            fac = np.zeros_like(nx)
            np.divide(tau, nx, out=fac, where=nx > 0)
            out[:, xsl] *= np.maximum(1.0 - fac, 0.0)[:, None]
            nfull = np.sqrt(
                np.sum(out[:, ysl] ** 2, axis=1) + np.sum(out[:, xsl] ** 2, axis=1)
            )
            fac = np.zeros_like(nfull)
            np.divide(tau, nfull, out=fac, where=nfull > 0)
            shrink = np.maximum(1.0 - fac, 0.0)[:, None]
            out[:, ysl] *= shrink
            out[:, xsl] *= shrink
        else:
            ny = np.linalg.norm(out[:, ysl], axis=1)
            fac = np.zeros_like(ny)
            np.divide(tau, ny, out=fac, where=ny > 0)
            out[:, ysl] *= np.maximum(1.0 - fac, 0.0)[:, None]
    return out


def _nested_penalty_rows(B: np.ndarray, spec: VarxSpec) -> np.ndarray:
    k, m = spec.k, spec.m
    pen = np.zeros(B.shape[0])
    for lag in range(1, spec.p + 1):
        ysl = slice((lag - 1) * k, lag * k)
        if lag <= spec.s and m > 0:
            xsl = slice(k * spec.p + (lag - 1) * m, k * spec.p + lag * m)
            pen += np.sqrt(np.sum(B[:, ysl] ** 2, axis=1) + np.sum(B[:, xsl] ** 2, axis=1))
            pen += np.linalg.norm(B[:, xsl], axis=1)
        else:
            pen += np.linalg.norm(B[:, ysl], axis=1)
    return pen


def _nested_descent(ops: DesignOps, spec: VarxSpec, lam: float, opts: SolverOptions,
                    B0: np.ndarray):
    sigma = ops.sigma1_full()
    if sigma <= 0.0:
        return np.zeros_like(B0), 1, True
    d = 1.0 / sigma
    tau = d * lam
    S, C0 = ops.S, ops.C0

    def f_rows(B: np.ndarray) -> np.ndarray:
        quad = 0.5 * np.einsum("iq,iq->i", B @ S, B) - np.einsum("iq,iq->i", B, C0)
        return quad + lam * _nested_penalty_rows(B, spec)

    X = B0.copy()
    Yx = X.copy()
    fx = f_rows(X)
    jvec = np.full(X.shape[0], 2.0)
    it = 0
    converged = False
    while it < opts.max_iter:
        Znew = _nested_prox_matrix(Yx - d * (Yx @ S - C0), tau, spec)
        fz = f_rows(Znew)
        inc = fz > fx + 1e-12 * (np.abs(fx) + 1.0)
        if np.any(inc):
            redo = _nested_prox_matrix(X[inc] - d * (X[inc] @ S - C0[inc]), tau, spec)
            Znew[inc] = redo
            fz[inc] = f_rows(Znew)[inc]
            jvec[inc] = 2.0
        change = float(np.max(np.abs(Znew - X)))
        mom = (jvec - 2.0) / (jvec + 1.0)
        Yx = Znew + mom[:, None] * (Znew - X)
        X, fx = Znew, fz
        jvec += 1.0
        it += 1
        if change < opts.tol:
            converged = True
            break
    return X, it, converged


# ---------------------------------------------------------------------------
# entry points


def _warm_matrix(opts: SolverOptions, spec: VarxSpec, warm) -> np.ndarray:
    src = warm if warm is not None else opts.warm_start
    if src is None:
        return np.zeros((spec.k, spec.n_regressors))
    if isinstance(src, CoefficientSet):
        B = src.matrix
    else:
        B = np.atleast_2d(np.asarray(src, dtype=float))
    if B.shape != (spec.k, spec.n_regressors):
        raise ValueError("warm start has the wrong shape")
    return B.copy()


def _finish(design: LaggedDesign, ops: DesignOps, B: np.ndarray, lam: float,
            structure: PenaltyStructure, partition: GroupPartition | None,
            iterations: int, converged: bool) -> FitResult:
    spec = design.spec
    nu = recover_intercept(B, design.y_bar, design.z_bar)
    coeffs = CoefficientSet.from_matrix(nu, B, spec)
    obj = least_squares_objective(design, B) + lam * penalty_value(B, structure, spec)
    if structure.kind == "basic":
        # singleton groups in row-major order; avoid materializing them
        active = np.flatnonzero(B.ravel() != 0.0).tolist()
    else:
        if partition is None:
            partition = group_partition(spec, structure)
        active = [i for i, g in enumerate(partition.groups) if np.any(g.values(B) != 0.0)]
    sparsity = float(np.mean(B == 0.0)) if B.size else 1.0
    if not converged:
        warnings.warn(
            f"{structure.kind} solver hit max_iter={iterations} before reaching tol"
        )
    return FitResult(
        coeffs=coeffs,
        objective=float(obj),
        iterations=iterations,
        sparsity_ratio=sparsity,
        active_groups=active,
        converged=converged,
        lam=float(lam),
        structure=structure,
    )


def fit_basic(design: LaggedDesign, lam: float, opts: SolverOptions | None = None,
              ops: DesignOps | None = None, warm=None) -> FitResult:
    """Entrywise-L1 fit by cyclic coordinate descent with exact scalar updates."""
    opts = opts or SolverOptions()
    ops = ops or DesignOps(design)
    structure = PenaltyStructure(kind="basic")
    B0 = _warm_matrix(opts, design.spec, warm)
    B, it, conv = _basic_descent(ops, lam, opts, B0)
    return _finish(design, ops, B, lam, structure, None, it, conv)


def fit_lag_group(design: LaggedDesign, lam: float, partition: GroupPartition | None = None,
                  opts: SolverOptions | None = None, ops: DesignOps | None = None,
                  warm=None) -> FitResult:
    """Per-lag group fit: block coordinate descent with trust-region updates."""
    opts = opts or SolverOptions()
    ops = ops or DesignOps(design)
    structure = PenaltyStructure(kind="lag")
    if partition is None:
        partition = group_partition(design.spec, structure)
    groups = _runtime_groups(ops, partition)
    B0 = _warm_matrix(opts, design.spec, warm)
    B, it, conv = _group_bcd(ops, groups, lam, opts, B0)
    return _finish(design, ops, B, lam, structure, partition, it, conv)


def fit_own_other(design: LaggedDesign, lam: float, partition: GroupPartition | None = None,
                  opts: SolverOptions | None = None, ops: DesignOps | None = None,
                  warm=None) -> FitResult:
    """Diagonal/off-diagonal split fit via the vectorized group machinery."""
    opts = opts or SolverOptions()
    ops = ops or DesignOps(design)
    structure = PenaltyStructure(kind="own_other")
    if partition is None:
        partition = group_partition(design.spec, structure)
    groups = _runtime_groups(ops, partition)
    B0 = _warm_matrix(opts, design.spec, warm)
    B, it, conv = _group_bcd(ops, groups, lam, opts, B0)
    return _finish(design, ops, B, lam, structure, partition, it, conv)


def fit_sparse_group(design: LaggedDesign, lam: float, alpha: float,
                     partition: GroupPartition | None = None,
                     opts: SolverOptions | None = None, ops: DesignOps | None = None,
                     warm=None, own_other: bool = False) -> FitResult:
    """Sparse (L1 + group) fit: screening plus an accelerated prox inner loop."""
    opts = opts or SolverOptions()
    ops = ops or DesignOps(design)
    kind = "sparse_own_other" if own_other else "sparse_lag"
    structure = PenaltyStructure(kind=kind, alpha=alpha)
    if partition is None:
        partition = group_partition(design.spec, structure)
    groups = _runtime_groups(ops, partition)
    B0 = _warm_matrix(opts, design.spec, warm)
    B, it, conv = _sparse_bcd(ops, groups, lam, alpha, opts, B0)
    return _finish(design, ops, B, lam, structure, partition, it, conv)


def fit_endogenous_first(design: LaggedDesign, lam: float,
                         opts: SolverOptions | None = None, ops: DesignOps | None = None,
                         warm=None) -> FitResult:
    """Nested endogenous-before-exogenous fit via row-decoupled proximal descent."""
    opts = opts or SolverOptions()
    ops = ops or DesignOps(design)
    spec = design.spec
    if spec.s > spec.p:
        raise ValueError("the endogenous-first structure requires s <= p")
    structure = PenaltyStructure(kind="endo_first")
    B0 = _warm_matrix(opts, spec, warm)
    B, it, conv = _nested_descent(ops, spec, lam, opts, B0)
    return _finish(design, ops, B, lam, structure, None, it, conv)


def fit_design(design: LaggedDesign, structure: PenaltyStructure, lam: float,
               opts: SolverOptions | None = None, ops: DesignOps | None = None,
               partition: GroupPartition | None = None, warm=None) -> FitResult:
    """Dispatch a centered design to the solver for ``structure``."""
    kind = structure.kind
    if kind == "basic":
        return fit_basic(design, lam, opts, ops, warm)
    if kind == "lag":
        return fit_lag_group(design, lam, partition, opts, ops, warm)
    if kind == "own_other":
        return fit_own_other(design, lam, partition, opts, ops, warm)
    if kind == "sparse_lag":
        return fit_sparse_group(design, lam, structure.alpha, partition, opts, ops, warm)
    if kind == "sparse_own_other":
        return fit_sparse_group(
            design, lam, structure.alpha, partition, opts, ops, warm, own_other=True
        )
    if kind == "endo_first":
        return fit_endogenous_first(design, lam, opts, ops, warm)
    raise ValueError(f"unknown structure {kind!r}")


def fit(endog, exog=None, spec: VarxSpec | None = None,
        structure: PenaltyStructure | str = "basic", lam: float = 0.0,
        minnesota: MinnesotaTarget | None = None,
        opts: SolverOptions | None = None, h: int | None = None) -> FitResult:
    """Fit one penalized VARX from raw series.

    Builds the (possibly h-gapped) design, optionally re-expresses the problem
    around a shrinkage target, solves, and recovers the intercept.  When a
    target is given the response is replaced by y_t minus the target's
    contribution, the zero-target problem is solved, and the target is added
    back; the reported coefficients are on the original scale.
    """
    if spec is None:
        raise ValueError("spec is required")
    if isinstance(structure, str):
        structure = PenaltyStructure.from_name(structure, spec.k)
    raw = build_lagged_design(endog, exog, spec, h=h, center=False)
    Y, Z = raw.Y, raw.Z
    offset = None
    target = None
    if minnesota is not None:
        target = minnesota.matrix(spec)
        offset = target @ Z
        Y = Y - offset
    y_bar = Y.mean(axis=1)
    z_bar = Z.mean(axis=1)
    centered = LaggedDesign(
        Z=Z - z_bar[:, None],
        Y=Y - y_bar[:, None],
        y_bar=y_bar,
        z_bar=z_bar,
        spec=spec,
        centered=True,
        offset=offset,
    )
    result = fit_design(centered, structure, lam, opts)
    if target is None:
        return result
    B = result.coeffs.matrix + target
    coeffs = CoefficientSet.from_matrix(result.coeffs.nu, B, spec)
    return replace(result, coeffs=coeffs)


# ---------------------------------------------------------------------------
# optimality certification


def kkt_max_violation(design: LaggedDesign, B: np.ndarray,
                      structure: PenaltyStructure, lam: float,
                      spec: VarxSpec | None = None) -> float:
    """Largest violation of the subgradient optimality conditions at B.

    Zero blocks must satisfy their screening inequality; nonzero blocks must
    satisfy the stationarity equation.  Returns the maximum excess, so a value
    near zero certifies convergence.
    """
    spec = spec or design.spec
    B = np.atleast_2d(np.asarray(B, dtype=float))
    G = design.Y @ design.Z.T - B @ (design.Z @ design.Z.T)  # residual correlation E Z'
    worst = 0.0
    kind = structure.kind
    if kind == "basic":
        zero = B == 0.0
        if np.any(zero):
            worst = max(worst, float((np.abs(G[zero]) - lam).max(initial=0.0)))
        if np.any(~zero):
            worst = max(worst, float(np.abs(G[~zero] - lam * np.sign(B[~zero])).max(initial=0.0)))
        return worst
    if kind == "endo_first":
        k, m = spec.k, spec.m
        for i in range(k):
            for lag in range(1, spec.p + 1):
                ysl = slice((lag - 1) * k, lag * k)
                has_x = lag <= spec.s and m > 0
                xsl = slice(k * spec.p + (lag - 1) * m, k * spec.p + lag * m) if has_x else None
                by = B[i, ysl]
                bx = B[i, xsl] if has_x else np.empty(0)
                gy = G[i, ysl]
                gx = G[i, xsl] if has_x else np.empty(0)
                u = np.concatenate([by, bx])
                nu_ = np.linalg.norm(u)
                if nu_ == 0.0:
                    ny, nx = np.linalg.norm(gy), np.linalg.norm(gx)
                    need = np.sqrt(ny**2 + max(nx - lam, 0.0) ** 2)
                    worst = max(worst, need - lam)
                    continue
                gohat = lam * u / nu_
                nx_b = np.linalg.norm(bx)
                if bx.size and nx_b > 0.0:
                    resid = np.concatenate([gy, gx]) - gohat
                    resid[len(by):] -= lam * bx / nx_b
                    worst = max(worst, float(np.abs(resid).max()))
                else:
                    worst = max(worst, float(np.abs(gy - gohat[: len(by)]).max()))
                    if bx.size:
                        worst = max(worst, float(np.linalg.norm(gx - gohat[len(by):]) - lam))
        return worst
    partition = group_partition(spec, structure)
    alpha = structure.alpha if structure.is_sparse else 0.0
    for g in partition.groups:
        bg = g.values(B)
        gg = g.values(G)
        grp_lam = (1.0 - alpha) * g.weight * lam
        if not np.any(bg):
            if structure.is_sparse:
                excess = np.linalg.norm(_st(gg, alpha * lam)) - grp_lam
            else:
                excess = np.linalg.norm(gg) - grp_lam
            worst = max(worst, float(excess))
        else:
            direction = grp_lam * bg / np.linalg.norm(bg)
            resid = gg - direction
            if structure.is_sparse:
                zero = bg == 0.0
                if np.any(~zero):
                    r = resid[~zero] - alpha * lam * np.sign(bg[~zero])
                    worst = max(worst, float(np.abs(r).max()))
                if np.any(zero):
                    worst = max(worst, float((np.abs(resid[zero]) - alpha * lam).max(initial=0.0)))
            else:
                worst = max(worst, float(np.abs(resid).max()))
    return worst
