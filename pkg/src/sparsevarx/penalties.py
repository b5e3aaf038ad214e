"""The six penalty structures: group partitions, weights, penalty evaluation,
zero-solution penalty bounds, and the log-linear penalty grid.

Group weights equal the square root of the group cardinality (so singleton
groups have weight one and a k x k lag block has weight k); the nested
structure is unweighted.  Solvers receive the weights folded into per-group
thresholds, so a single user-facing penalty value drives every structure.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LaggedDesign, VarxSpec

__all__ = [
    "STRUCTURES",
    "PenaltyStructure",
    "Group",
    "GroupPartition",
    "LambdaGrid",
    "group_partition",
    "penalty_value",
    "lambda_max",
    "lambda_grid",
    "default_alpha",
]

STRUCTURES = ("basic", "lag", "own_other", "sparse_lag", "sparse_own_other", "endo_first")
_SPARSE = ("sparse_lag", "sparse_own_other")


def default_alpha(k: int) -> float:
    """Within-group mixing weight 1 / (k + 1) used by the sparse structures."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return 1.0 / (k + 1)


@dataclass(frozen=True)
class PenaltyStructure:
    """One of the six structures, with the L1 mixing weight for sparse kinds."""

    kind: str
    alpha: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in STRUCTURES:
            raise ValueError(f"unknown structure {self.kind!r}; expected one of {STRUCTURES}")
        if self.kind in _SPARSE:
            if self.alpha is None:
                raise ValueError(f"{self.kind} requires alpha; use PenaltyStructure.from_name")
            if not 0.0 <= self.alpha <= 1.0:
                raise ValueError("alpha must lie in [0, 1]")

    @classmethod
    def from_name(cls, name: str, k: int, alpha: float | None = None) -> "PenaltyStructure":
        name = name.strip().lower()
        if name in _SPARSE and alpha is None:
            alpha = default_alpha(k)
        if name not in _SPARSE:
            alpha = None
        return cls(kind=name, alpha=alpha)

    @property
    def is_sparse(self) -> bool:
        return self.kind in _SPARSE

    @property
    def is_nested(self) -> bool:
        return self.kind == "endo_first"


@dataclass(frozen=True)
class Group:
    """A set of coefficient positions in B = [phi, beta].

    ``rows is None`` marks a full-column group (every row of ``cols``); nested
    groups carry the owning coefficient row in ``row``.
    """

    cols: np.ndarray
    rows: np.ndarray | None
    weight: float
    kind: str
    lag: int = 0
    row: int = -1

    @property
    def size(self) -> int:
        if self.rows is None:
            raise ValueError("full-column group size depends on k")
        return len(self.cols)

    def values(self, B: np.ndarray) -> np.ndarray:
        if self.rows is None:
            return B[:, self.cols]
        return B[self.rows, self.cols]

    def norm(self, B: np.ndarray) -> float:
        return float(np.linalg.norm(self.values(B)))


@dataclass(frozen=True)
class GroupPartition:
    spec: VarxSpec
    structure: PenaltyStructure
    groups: tuple[Group, ...]

    def __len__(self) -> int:
        return len(self.groups)


def _exog_column_groups(spec: VarxSpec) -> list[Group]:
    out = []
    base = spec.k * spec.p
    for lag in range(1, spec.s + 1):
        for i in range(spec.m):
            col = base + (lag - 1) * spec.m + i
            out.append(
                Group(
                    cols=np.array([col]),
                    rows=None,
                    weight=float(np.sqrt(spec.k)),
                    kind="exog-column",
                    lag=lag,
                )
            )
    return out


def _lag_groups(spec: VarxSpec) -> list[Group]:
    out = []
    for lag in range(1, spec.p + 1):
        cols = np.arange((lag - 1) * spec.k, lag * spec.k)
        out.append(Group(cols=cols, rows=None, weight=float(spec.k), kind="endog-lag", lag=lag))
    out.extend(_exog_column_groups(spec))
    return out


def _own_other_groups(spec: VarxSpec) -> list[Group]:
    k = spec.k
    out = []
    for lag in range(1, spec.p + 1):
        off = (lag - 1) * k
        diag = np.arange(k)
        out.append(
            Group(
                cols=off + diag,
                rows=diag,
                weight=float(np.sqrt(k)),
                kind="own-diag",
                lag=lag,
            )
        )
        if k > 1:
            rr, cc = np.nonzero(~np.eye(k, dtype=bool))
            out.append(
                Group(
                    cols=off + cc,
                    rows=rr,
                    weight=float(np.sqrt(k * (k - 1))),
                    kind="other-offdiag",
                    lag=lag,
                )
            )
    out.extend(_exog_column_groups(spec))
    return out


def _nested_groups(spec: VarxSpec) -> list[Group]:
    if spec.s > spec.p:
        raise ValueError("the endogenous-first structure requires s <= p")
    k, m = spec.k, spec.m
    out = []
    for i in range(k):
        for lag in range(1, spec.p + 1):
            ycols = np.arange((lag - 1) * k, lag * k)
            if lag <= spec.s and m > 0:
                xcols = k * spec.p + np.arange((lag - 1) * m, lag * m)
                outer = np.concatenate([ycols, xcols])
            else:
                xcols = None
                outer = ycols
            out.append(
                Group(
                    cols=outer,
                    rows=np.full(len(outer), i),
                    weight=1.0,
                    kind="nested-outer",
                    lag=lag,
                    row=i,
                )
            )
            if xcols is not None:
                out.append(
                    Group(
                        cols=xcols,
                        rows=np.full(len(xcols), i),
                        weight=1.0,
                        kind="nested-inner",
                        lag=lag,
                        row=i,
                    )
                )
    return out


def _basic_groups(spec: VarxSpec) -> list[Group]:
    out = []
    for i in range(spec.k):
        for j in range(spec.n_regressors):
            out.append(
                Group(cols=np.array([j]), rows=np.array([i]), weight=1.0, kind="entry")
            )
    return out


def group_partition(spec: VarxSpec, structure: PenaltyStructure) -> GroupPartition:
    """Build the coefficient grouping of the given structure for ``spec``."""
    kind = structure.kind
    if kind == "basic":
        groups = _basic_groups(spec)
    elif kind in ("lag", "sparse_lag"):
        groups = _lag_groups(spec)
    elif kind in ("own_other", "sparse_own_other"):
        groups = _own_other_groups(spec)
    elif kind == "endo_first":
        groups = _nested_groups(spec)
    else:  # pragma: no cover - guarded by PenaltyStructure
        raise ValueError(f"unknown structure {kind!r}")
    return GroupPartition(spec=spec, structure=structure, groups=tuple(groups))


def penalty_value(B: np.ndarray, structure: PenaltyStructure, spec: VarxSpec) -> float:
    """Evaluate the structure's penalty (excluding the lambda factor) at B."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if B.shape != (spec.k, spec.n_regressors):
        raise ValueError(f"B must have shape ({spec.k}, {spec.n_regressors}), got {B.shape}")
    if structure.kind == "basic":
        return float(np.abs(B).sum())
    partition = group_partition(spec, structure)
    group_part = sum(g.weight * g.norm(B) for g in partition.groups)
    if structure.is_sparse:
        alpha = structure.alpha
        return float((1.0 - alpha) * group_part + alpha * np.abs(B).sum())
    return float(group_part)


def _sparse_group_threshold(c: np.ndarray, alpha: float, weight: float) -> float:
    """Smallest lambda at which the zero vector solves the one-group problem
    with penalty lambda * ((1 - alpha) * weight * ||.||_F + alpha * ||.||_1)."""
    c = np.abs(np.asarray(c, dtype=float)).ravel()
    norm = float(np.linalg.norm(c))
    if norm == 0.0:
        return 0.0
    if alpha <= 0.0:
        return norm / weight
    cmax = float(c.max())
    if alpha >= 1.0:
        return cmax
    lo = 0.0
    hi = max(cmax / alpha, norm / ((1.0 - alpha) * weight))

    def excess(lam: float) -> float:
        return float(np.linalg.norm(np.maximum(c - alpha * lam, 0.0))) - (1.0 - alpha) * weight * lam

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return hi


def _nested_threshold(c_endog: np.ndarray, c_exog: np.ndarray) -> float:
    """Smallest lambda zeroing one nested (outer + inner) block."""
    ny = float(np.linalg.norm(c_endog))
    nx = float(np.linalg.norm(c_exog)) if c_exog.size else 0.0
    if nx <= ny:
        return ny
    return (ny * ny + nx * nx) / (2.0 * nx)


def lambda_max(design: LaggedDesign, structure: PenaltyStructure, spec: VarxSpec) -> float:
    """Smallest penalty at which the all-zero coefficient matrix is optimal.

    Computed from the zero-solution optimality condition of each structure, so
    fitting just above the returned value yields B = 0 exactly while fitting
    below it activates at least one group.
    """
    if not design.centered:
        raise ValueError("lambda_max requires a centered design")
    C = design.Y @ design.Z.T
    if not np.any(C):
        return 0.0
    kind = structure.kind
    if kind == "basic":
        return float(np.abs(C).max())
    if kind == "endo_first":
        best = 0.0
        k, m = spec.k, spec.m
        for i in range(k):
            for lag in range(1, spec.p + 1):
                cy = C[i, (lag - 1) * k : lag * k]
                if lag <= spec.s and m > 0:
                    cx = C[i, k * spec.p + (lag - 1) * m : k * spec.p + lag * m]
                else:
                    cx = np.empty(0)
                best = max(best, _nested_threshold(cy, cx))
        return best
    partition = group_partition(spec, structure)
    best = 0.0
    for g in partition.groups:
        c = g.values(C)
        if structure.is_sparse:
            best = max(best, _sparse_group_threshold(c, structure.alpha, g.weight))
        else:
            best = max(best, float(np.linalg.norm(c)) / g.weight)
    return best


@dataclass(frozen=True)
class LambdaGrid:
    """Descending log-linear penalty grid from lambda_max down to lambda_max / depth."""

    values: np.ndarray
    depth: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


def lambda_grid(lambda_max: float, n_points: int = 10, depth: float = 25.0) -> LambdaGrid:
    """Grid values lambda_max * depth^(-i / (n_points - 1)), i = 0..n_points-1."""
    if lambda_max <= 0.0:
        raise ValueError(
            "lambda_max must be positive; a zero value indicates degenerate (all-zero) data"
        )
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    if depth <= 1.0:
        raise ValueError("depth must exceed 1")
    i = np.arange(n_points)
    values = lambda_max * depth ** (-i / (n_points - 1))
    return LambdaGrid(values=values, depth=float(depth))
