"""Rolling-origin penalty selection, out-of-sample forecast evaluation, and
sparsity accounting.

An *origin* t is the number of observations available to the fit; forecasts
target observation t + h.  Training origins run from T1 = floor(T/3) to
T2 - h with T2 = floor(2T/3); evaluation origins run from T2 - h to T - h.
Windows expand one observation at a time, and each penalty value keeps its own
warm-start chain across origins.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CoefficientSet, VarxSpec, build_lagged_design, forecast_direct
from .penalties import GroupPartition, LambdaGrid, PenaltyStructure, group_partition
from .solvers import DesignOps, FitResult, SolverOptions, fit_design

__all__ = [
    "CvResult",
    "EvaluationReport",
    "split_indices",
    "cv_origins",
    "evaluation_origins",
    "rolling_cv",
    "evaluate",
    "sparsity_ratio",
    "PenalizedForecaster",
]


def sparsity_ratio(coeffs: CoefficientSet | np.ndarray) -> float:
    """Fraction of [phi, beta] entries that are exactly zero (intercept excluded)."""
    if isinstance(coeffs, CoefficientSet):
        B = coeffs.matrix
    else:
        B = np.atleast_2d(np.asarray(coeffs, dtype=float))
    if B.size == 0:
        return 1.0
    return float(np.mean(B == 0.0))


def split_indices(T: int, h: int = 1) -> tuple[int, int]:
    """Thirds of the sample: T1 = floor(T/3), T2 = floor(2T/3)."""
    T1 = T // 3
    T2 = (2 * T) // 3
    if T1 < 1 or T2 - T1 - h + 1 < 1:
        raise ValueError(
            f"series of length {T} is too short to split into initialization, "
            f"training, and evaluation segments at horizon {h}"
        )
    return T1, T2


def cv_origins(T: int, h: int = 1) -> list[int]:
    """Training origins t = T1, ..., T2 - h (observation counts)."""
    T1, T2 = split_indices(T, h)
    return list(range(T1, T2 - h + 1))


def evaluation_origins(T: int, h: int = 1) -> list[int]:
    """Evaluation origins t = T2 - h, ..., T - h."""
    _, T2 = split_indices(T, h)
    return list(range(T2 - h, T - h + 1))


@dataclass
class CvResult:
    lambda_hat: float
    lambda_index: int
    msfe_curve: np.ndarray
    origins: list[int]
    per_origin_errors: np.ndarray
    grid: LambdaGrid

    @property
    def n_valid(self) -> int:
        return int(np.sum(np.all(np.isfinite(self.per_origin_errors), axis=0)))


@dataclass
class EvaluationReport:
    msfe: float
    msfe_relative: float
    sparsity_ratio_avg: float
    per_period_sse: np.ndarray
    origins: list[int]


def _values(series) -> np.ndarray:
    v = getattr(series, "values", series)
    v = np.asarray(v, dtype=float)
    return v[:, None] if v.ndim == 1 else v


def rolling_cv(
    endog,
    exog,
    spec: VarxSpec,
    structure: PenaltyStructure | str,
    grid: LambdaGrid,
    h: int | None = None,
    opts: SolverOptions | None = None,
    warm_starts: bool = True,
) -> CvResult:
    """Select the penalty by expanding-window mean squared forecast error.

    Every grid value is refit at each origin (warm-started from the previous
    origin for the same value); the minimizer of the averaged error is
    returned, ties resolving to the stronger penalty.  Origins where a fit
    fails invalidate that penalty value.
    """
    y = _values(endog)
    x = _values(exog) if exog is not None else None
    if isinstance(structure, str):
        structure = PenaltyStructure.from_name(structure, spec.k)
    if h is None:
        h = spec.h
    if len(grid) < 1:
        raise ValueError("empty penalty grid")
    opts = opts or SolverOptions()
    T = y.shape[0]
    origins = cv_origins(T, h)
    if origins[0] <= spec.max_lag + h - 1:
        raise ValueError(
            f"first training origin {origins[0]} cannot support lags p={spec.p}, "
            f"s={spec.s} at horizon {h}; series too short"
        )
    partition = None
    if not structure.is_nested and structure.kind != "basic":
        partition = group_partition(spec, structure)
    n_lam = len(grid)
    errors = np.full((len(origins), n_lam), np.nan)
    warm: list[np.ndarray | None] = [None] * n_lam
    lam_values = np.asarray(grid.values, dtype=float)
    sigma_warm: dict | None = None
    for oi, t in enumerate(origins):
        design = build_lagged_design(y[:t], x[:t] if x is not None else None, spec, h=h)
        ops = DesignOps(design, sigma_warm=sigma_warm)
        target = y[t + h - 1]
        for li, lam in enumerate(lam_values):
            try:
                res = fit_design(
                    design, structure, lam, opts, ops=ops, partition=partition,
                    warm=warm[li] if warm_starts else None,
                )
            except Exception:
                errors[oi, li] = np.nan
                continue
            if warm_starts:
                warm[li] = res.coeffs.matrix
            yhat = forecast_direct(
                res.coeffs, y[t - spec.p : t], x[t - spec.s : t] if x is not None else None
            )
            errors[oi, li] = float(np.sum((target - yhat) ** 2))
        sigma_warm = ops.carry_warm_vectors() or sigma_warm
    curve = errors.mean(axis=0)
    curve = np.where(np.all(np.isfinite(errors), axis=0), curve, np.inf)
    if not np.any(np.isfinite(curve)):
        raise RuntimeError("every penalty value failed during cross-validation")
    idx = int(np.argmin(curve))  # first minimum = largest penalty on ties
    return CvResult(
        lambda_hat=float(lam_values[idx]),
        lambda_index=idx,
        msfe_curve=curve,
        origins=origins,
        per_origin_errors=errors,
        grid=grid,
    )


class PenalizedForecaster:
    """Refit-at-each-origin forecast strategy with a fixed penalty value.

    Keeps a warm-start chain across calls, so feeding it expanding windows in
    time order reproduces the rolling evaluation loop cheaply.
    """

    def __init__(self, spec: VarxSpec, structure: PenaltyStructure | str, lam: float,
                 opts: SolverOptions | None = None, h: int | None = None):
        if isinstance(structure, str):
            structure = PenaltyStructure.from_name(structure, spec.k)
        self.spec = spec
        self.structure = structure
        self.lam = float(lam)
        self.opts = opts or SolverOptions()
        self.h = h if h is not None else spec.h
        self.name = structure.kind
        self._warm: np.ndarray | None = None
        self._partition: GroupPartition | None = None
        if not structure.is_nested and structure.kind != "basic":
            self._partition = group_partition(spec, structure)
        self.last_fit: FitResult | None = None
        self.last_sparsity: float | None = None
        self._sigma_warm: dict | None = None

    def forecast(self, endog_past: np.ndarray, exog_past: np.ndarray | None = None) -> np.ndarray:
        y = _values(endog_past)
        x = _values(exog_past) if exog_past is not None else None
        design = build_lagged_design(y, x, self.spec, h=self.h)
        ops = DesignOps(design, sigma_warm=self._sigma_warm)
        res = fit_design(design, self.structure, self.lam, self.opts, ops=ops,
                         partition=self._partition, warm=self._warm)
        self._sigma_warm = ops.carry_warm_vectors() or self._sigma_warm
        self._warm = res.coeffs.matrix
        self.last_fit = res
        self.last_sparsity = res.sparsity_ratio
        tail_x = x[-self.spec.s :] if (x is not None and self.spec.s > 0) else None
        return forecast_direct(res.coeffs, y[-self.spec.p :], tail_x)


def evaluate(
    endog,
    exog,
    spec: VarxSpec,
    model,
    h: int | None = None,
    baseline=None,
    origins: list[int] | None = None,
) -> EvaluationReport:
    """Expanding-window forecast evaluation of a fitted-or-refitting strategy.

    ``model`` (and the optional ``baseline``) expose
    ``forecast(endog_past, exog_past) -> k-vector``.  Reports the mean squared
    forecast error over the evaluation origins, its ratio to the baseline, the
    average sparsity ratio when the model reports one, and the per-period
    squared errors consumed by the model-confidence-set machinery.
    """
    y = _values(endog)
    x = _values(exog) if exog is not None else None
    if h is None:
        h = spec.h
    T = y.shape[0]
    if origins is None:
        origins = evaluation_origins(T, h)
    sse = np.empty(len(origins))
    sparsities = []
    for i, t in enumerate(origins):
        yhat = model.forecast(y[:t], x[:t] if x is not None else None)
        sse[i] = float(np.sum((y[t + h - 1] - np.asarray(yhat)) ** 2))
        sp = getattr(model, "last_sparsity", None)
        if sp is not None:
            sparsities.append(sp)
    msfe = float(sse.mean())
    rel = np.nan
    if baseline is not None:
        base_sse = np.empty(len(origins))
        for i, t in enumerate(origins):
            bhat = baseline.forecast(y[:t], x[:t] if x is not None else None)
            base_sse[i] = float(np.sum((y[t + h - 1] - np.asarray(bhat)) ** 2))
        denom = float(base_sse.mean())
        rel = msfe / denom if denom > 0 else np.inf
    return EvaluationReport(
        msfe=msfe,
        msfe_relative=float(rel),
        sparsity_ratio_avg=float(np.mean(sparsities)) if sparsities else float("nan"),
        per_period_sse=sse,
        origins=list(origins),
    )
