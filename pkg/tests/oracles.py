"""Independent reference implementations used to check the solvers.

Everything here is deliberately written against the penalty definitions only,
through generic full-matrix proximal gradient descent, without touching the
package's block-coordinate machinery.
"""
from __future__ import annotations

import numpy as np

from sparsevarx.core import LaggedDesign, VarxSpec
from sparsevarx.penalties import PenaltyStructure, group_partition, penalty_value


def objective(design: LaggedDesign, B: np.ndarray, structure: PenaltyStructure,
              lam: float, spec: VarxSpec) -> float:
    resid = design.Y - B @ design.Z
    return 0.5 * float(np.sum(resid * resid)) + lam * penalty_value(B, structure, spec)


def _shrink(v: np.ndarray, t: float) -> np.ndarray:
    n = np.linalg.norm(v)
    if n <= t or n == 0.0:
        return np.zeros_like(v)
    return (1.0 - t / n) * v


def prox_penalty(A: np.ndarray, tau: float, structure: PenaltyStructure,
                 spec: VarxSpec) -> np.ndarray:
    """Exact prox of tau * penalty at A, assembled group by group."""
    kind = structure.kind
    out = A.copy()
    if kind == "basic":
        return np.sign(A) * np.maximum(np.abs(A) - tau, 0.0)
    if kind == "endo_first":
        k, m, p, s = spec.k, spec.m, spec.p, spec.s
        for i in range(k):
            for lag in range(1, p + 1):
                ysl = slice((lag - 1) * k, lag * k)
                if lag <= s and m > 0:
                    xsl = slice(k * p + (lag - 1) * m, k * p + lag * m)
                    block = np.concatenate([out[i, ysl], out[i, xsl]])
                    block[k:] = _shrink(block[k:], tau)
                    block = _shrink(block, tau)
                    out[i, ysl] = block[:k]
                    out[i, xsl] = block[k:]
                else:
                    out[i, ysl] = _shrink(out[i, ysl], tau)
        return out
    partition = group_partition(spec, structure)
    alpha = structure.alpha if structure.is_sparse else 0.0
    for g in partition.groups:
        vals = g.values(A)
        if structure.is_sparse:
            vals = np.sign(vals) * np.maximum(np.abs(vals) - tau * alpha, 0.0)
            vals = _shrink(vals, tau * (1.0 - alpha) * g.weight)
        else:
            vals = _shrink(vals, tau * g.weight)
        if g.rows is None:
            out[:, g.cols] = vals
        else:
            out[g.rows, g.cols] = vals
    return out


def prox_gradient_solve(design: LaggedDesign, structure: PenaltyStructure, lam: float,
                        spec: VarxSpec, tol: float = 1e-9, max_iter: int = 200000,
                        B0: np.ndarray | None = None) -> np.ndarray:
    """Accelerated proximal gradient on the full objective, restarted whenever
    the objective rises, run to a tight tolerance."""
    Z, Y = design.Z, design.Y
    S = Z @ Z.T
    C0 = Y @ Z.T
    L = float(np.linalg.eigvalsh(S).max()) if S.size else 0.0
    if L <= 0.0:
        return np.zeros((spec.k, spec.n_regressors))
    d = 1.0 / L
    X = B0.copy() if B0 is not None else np.zeros((spec.k, spec.n_regressors))
    Yx = X.copy()
    fx = objective(design, X, structure, lam, spec)
    t = 1.0
    for _ in range(max_iter):
        G = Yx @ S - C0
        Znew = prox_penalty(Yx - d * G, d * lam, structure, spec)
        fz = objective(design, Znew, structure, lam, spec)
        if fz > fx + 1e-14 * (abs(fx) + 1.0):
            G = X @ S - C0
            Znew = prox_penalty(X - d * G, d * lam, structure, spec)
            fz = objective(design, Znew, structure, lam, spec)
            t = 1.0
        change = float(np.max(np.abs(Znew - X)))
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        Yx = Znew + ((t - 1.0) / t_new) * (Znew - X)
        X, fx, t = Znew, fz, t_new
        if change < tol:
            break
    return X


def cvxpy_solve(design: LaggedDesign, structure: PenaltyStructure, lam: float,
                spec: VarxSpec) -> np.ndarray:
    """Declarative convex-programming solve of the same objective (slow; used to
    validate the proximal oracle itself on small instances)."""
    import cvxpy as cp

    k, q = spec.k, spec.n_regressors
    B = cp.Variable((k, q))
    loss = 0.5 * cp.sum_squares(design.Y - B @ design.Z)
    kind = structure.kind
    if kind == "basic":
        pen = cp.norm1(cp.vec(B, order="F"))
    elif kind == "endo_first":
        terms = []
        p, s, m = spec.p, spec.s, spec.m
        for i in range(k):
            for lag in range(1, p + 1):
                yblk = B[i, (lag - 1) * k : lag * k]
                if lag <= s and m > 0:
                    xblk = B[i, k * p + (lag - 1) * m : k * p + lag * m]
                    terms.append(cp.norm2(cp.hstack([yblk, xblk])))
                    terms.append(cp.norm2(xblk))
                else:
                    terms.append(cp.norm2(yblk))
        pen = cp.sum(cp.hstack(terms))
    else:
        partition = group_partition(spec, structure)
        alpha = structure.alpha if structure.is_sparse else 0.0
        terms = []
        for g in partition.groups:
            if g.rows is None:
                vals = cp.vec(B[:, g.cols], order="F")
            else:
                vals = cp.hstack([B[r, c] for r, c in zip(g.rows, g.cols)])
            terms.append(g.weight * cp.norm2(vals))
        pen = cp.sum(cp.hstack(terms))
        if structure.is_sparse:
            pen = (1.0 - alpha) * pen + alpha * cp.norm1(cp.vec(B, order="F"))
    prob = cp.Problem(cp.Minimize(loss + lam * pen))
    prob.solve(solver=cp.CLARABEL)
    return np.asarray(B.value)


def nested_prox_subproblem_cvxpy(v: np.ndarray, lam: float, k: int, m: int) -> np.ndarray:
    """Reference solution of min_u 0.5||u - v||^2 + lam(||u|| + ||u_exog||)."""
    import cvxpy as cp

    u = cp.Variable(k + m)
    obj = 0.5 * cp.sum_squares(u - v) + lam * (cp.norm2(u) + cp.norm2(u[k:]))
    cp.Problem(cp.Minimize(obj)).solve(solver=cp.CLARABEL)
    return np.asarray(u.value)


def ls_solution(design: LaggedDesign) -> np.ndarray:
    """QR-based least squares B minimizing ||Y - B Z||_F."""
    B, *_ = np.linalg.lstsq(design.Z.T, design.Y.T, rcond=None)
    return B.T
