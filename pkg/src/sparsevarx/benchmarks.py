"""Comparison models: naive forecasters, information-criterion least-squares
VARX, a dummy-observation Bayesian VAR, and a principal-component factor model.

Each model is also wrapped as a refit-per-origin forecaster exposing
``forecast(endog_past, exog_past)``, the interface consumed by the evaluation
and study pipelines.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import CoefficientSet, VarxSpec, build_lagged_design, forecast_direct
from .penalties import LambdaGrid
from .validation import cv_origins, split_indices

__all__ = [
    "BgrPrior",
    "IcSelection",
    "forecast_sample_mean",
    "forecast_random_walk",
    "ic_value",
    "fit_ls_varx_ic",
    "fit_bgr",
    "bgr_dummies",
    "FactorModel",
    "fit_factor_model",
    "MeanForecaster",
    "RandomWalkForecaster",
    "IcForecaster",
    "BgrForecaster",
    "FactorForecaster",
    "BGR_DEFAULT_GRID",
]


def _values(series) -> np.ndarray:
    v = getattr(series, "values", series)
    v = np.asarray(v, dtype=float)
    return v[:, None] if v.ndim == 1 else v


def forecast_sample_mean(endog, t: int, h: int = 1) -> np.ndarray:
    """Mean of observations 1..t; the horizon does not enter."""
    y = _values(endog)
    if t < 1 or t > y.shape[0]:
        raise ValueError("t must index an available observation")
    return y[:t].mean(axis=0)


def forecast_random_walk(endog, t: int, h: int = 1) -> np.ndarray:
    """Most recent observation; the horizon does not enter."""
    y = _values(endog)
    if t < 1 or t > y.shape[0]:
        raise ValueError("t must index an available observation")
    return y[t - 1].copy()


def ic_value(sigma_hat_det: float, k: int, l: int, j: int, m: int, T: int,
             criterion: str = "aic") -> float:
    """log|Sigma_hat| plus the coefficient-count penalty of AIC or BIC."""
    if sigma_hat_det <= 0:
        raise ValueError("residual covariance determinant must be positive")
    n_coef = k * (k * l + m * j)
    if criterion.lower() == "aic":
        pen = 2.0 * n_coef / T
    elif criterion.lower() == "bic":
        pen = np.log(T) * n_coef / T
    else:
        raise ValueError("criterion must be 'aic' or 'bic'")
    return float(np.log(sigma_hat_det) + pen)


@dataclass
class IcSelection:
    p_hat: int
    s_hat: int
    criterion_values: np.ndarray
    criterion: str


def _qr_ridge_lstsq(X: np.ndarray, Y: np.ndarray, n_lagged: int) -> np.ndarray:
    """Least squares through a QR factorization with a conditioning ridge.

    The ridge magnitude ((d^2 + d + 1) * machine epsilon, scaled by each lagged
    column's norm) keeps the residual covariance well defined without
    noticeably perturbing the estimates.
    """
    n, c = X.shape
    if n_lagged > 0:
        d = n_lagged
        eps = np.finfo(float).eps
        scale = np.sqrt((d * d + d + 1.0) * eps)
        norms = np.linalg.norm(X[:, c - n_lagged :], axis=0)
        norms = np.maximum(norms, 1.0)
        aug = np.zeros((n_lagged, c))
        aug[:, c - n_lagged :] = np.diag(scale * norms)
        X = np.vstack([X, aug])
        Y = np.vstack([Y, np.zeros((n_lagged, Y.shape[1]))])
    Q, R = np.linalg.qr(X)
    return scipy.linalg.solve_triangular(R, Q.T @ Y)


def _candidate_design(y: np.ndarray, x: np.ndarray | None, l: int, j: int,
                      base: int, h: int) -> np.ndarray:
    """Regressor rows [1, y_{t-h}', ..., y_{t-h-l+1}', x_{t-h}', ..., x_{t-h-j+1}']
    for responses t = base..T-1 (0-indexed)."""
    T = y.shape[0]
    n = T - base
    cols = [np.ones((n, 1))]
    for lag in range(1, l + 1):
        lo = base - h - lag + 1
        cols.append(y[lo : lo + n])
    for lag in range(1, j + 1):
        lo = base - h - lag + 1
        cols.append(x[lo : lo + n])
    return np.hstack(cols)


def fit_ls_varx_ic(endog, exog=None, p_max: int = 1, s_max: int = 0,
                   criterion: str = "aic", h: int = 1) -> tuple[IcSelection, CoefficientSet]:
    """All-subset lag-order search 0 <= l <= p_max, 0 <= s <= s_max by least squares.

    Every candidate uses the common effective sample implied by (p_max, s_max)
    so the log-determinants are comparable; candidates whose per-equation
    parameter count reaches the sample size are skipped.
    """
    y = _values(endog)
    x = _values(exog) if exog is not None else None
    if s_max > 0 and x is None:
        raise ValueError("s_max > 0 requires exogenous data")
    k = y.shape[1]
    m = x.shape[1] if x is not None else 0
    base = max(p_max, s_max) + h - 1
    n = y.shape[0] - base
    if n < 2:
        raise ValueError("series too short for the requested lag orders")
    Yresp = y[base:]
    table = np.full((p_max + 1, s_max + 1), np.inf)
    fits: dict[tuple[int, int], np.ndarray] = {}
    for l in range(p_max + 1):
        for j in range(s_max + 1):
            n_lagged = k * l + m * j
            if n_lagged >= n:
                continue
            X = _candidate_design(y, x, l, j, base, h)
            try:
                theta = _qr_ridge_lstsq(X, Yresp, n_lagged)
            except np.linalg.LinAlgError:
                continue
            resid = Yresp - X @ theta
            sigma = resid.T @ resid / n
            sign, logdet = np.linalg.slogdet(sigma)
            if sign <= 0:
                continue
            n_coef = k * n_lagged
            pen = (2.0 if criterion.lower() == "aic" else np.log(n)) * n_coef / n
            table[l, j] = logdet + pen
            fits[(l, j)] = theta
    if not np.any(np.isfinite(table)):
        raise RuntimeError("every lag-order candidate was ill-conditioned or too large")
    l_hat, j_hat = np.unravel_index(int(np.argmin(table)), table.shape)
    theta = fits[(int(l_hat), int(j_hat))]
    nu = theta[0]
    B = theta[1:].T
    coeffs = CoefficientSet(
        nu=nu, phi=B[:, : k * l_hat], beta=B[:, k * l_hat :]
    )
    return IcSelection(int(l_hat), int(j_hat), table, criterion.lower()), coeffs


# ---------------------------------------------------------------------------
# dummy-observation Bayesian VAR


@dataclass
class BgrPrior:
    """Tightness and scale parameters of the dummy-observation prior.

    ``sigma`` are per-series scales from univariate autoregressions, ``mu``
    the unconditional means; ``delta`` = 1 encodes a random-walk prior mean,
    0 a white-noise one.  ``tau`` (the sum-of-coefficients tightness) is tied
    to 10 * lam and ``epsilon`` keeps the intercept essentially unpenalized.
    """

    lam: float
    delta: float
    sigma: np.ndarray
    mu: np.ndarray
    epsilon: float = 1e-5

    def __post_init__(self) -> None:
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.delta not in (0.0, 1.0, 0, 1):
            raise ValueError("delta must be 0 or 1")
        object.__setattr__(self, "sigma", np.asarray(self.sigma, dtype=float))
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float))

    @property
    def tau(self) -> float:
        return 10.0 * self.lam

    @classmethod
    def estimate(cls, joint, p: int, lam: float, delta: float = 0.0) -> "BgrPrior":
        """Scales from univariate AR(p) residual standard deviations, means from
        the unconditional sample means."""
        v = _values(joint)
        T, n = v.shape
        if T <= p + 1:
            raise ValueError("series too short to estimate the prior scales")
        sigma = np.empty(n)
        for i in range(n):
            X = np.column_stack(
                [np.ones(T - p)] + [v[p - lag : T - lag, i] for lag in range(1, p + 1)]
            )
            yresp = v[p:, i]
            coef, *_ = np.linalg.lstsq(X, yresp, rcond=None)
            resid = yresp - X @ coef
            sigma[i] = np.std(resid)
        sigma = np.maximum(sigma, 1e-12)
        return cls(lam=lam, delta=float(delta), sigma=sigma, mu=v.mean(axis=0))


def bgr_dummies(prior: BgrPrior, p: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """The two dummy-observation blocks (Y_d1, X_d1, Y_d2, X_d2).

    Regressor rows are laid out [intercept, lag 1 block, ..., lag p block].
    The first block shrinks lag-one coefficients toward delta * I and higher
    lags toward zero with tightness lam; the second bounds the coefficient
    sums with looseness tau = 10 * lam.
    """
    sigma = prior.sigma
    n = sigma.shape[0]
    lam, tau, eps, delta = prior.lam, prior.tau, prior.epsilon, prior.delta
    Y_d1 = np.vstack(
        [
            np.diag(delta * sigma) / lam,
            np.zeros((n * (p - 1), n)),
            np.diag(sigma),
            np.zeros((1, n)),
        ]
    )
    J_p = np.diag(np.arange(1, p + 1, dtype=float))
    X_top = np.hstack([np.zeros((n * p, 1)), np.kron(J_p, np.diag(sigma)) / lam])
    X_mid = np.zeros((n, 1 + n * p))
    X_bot = np.hstack([[[eps]], np.zeros((1, n * p))])
    X_d1 = np.vstack([X_top, X_mid, X_bot])
    dmu = np.diag(prior.delta * prior.mu) / tau
    Y_d2 = dmu
    X_d2 = np.hstack([np.zeros((n, 1)), np.tile(dmu, (1, p))])
    return Y_d1, X_d1, Y_d2, X_d2


def fit_bgr(joint, p: int, prior: BgrPrior, h: int = 1) -> CoefficientSet:
    """Posterior-mean VAR fit on the joint series via augmented least squares."""
    v = _values(joint)
    n = v.shape[1]
    if prior.sigma.shape[0] != n or prior.mu.shape[0] != n:
        raise ValueError("prior dimension does not match the series")
    spec = VarxSpec(k=n, m=0, p=p, s=0, h=h)
    design = build_lagged_design(v, None, spec, h=h, center=False)
    X = np.hstack([np.ones((design.t_eff, 1)), design.Z.T])
    Y = design.Y.T
    Y_d1, X_d1, Y_d2, X_d2 = bgr_dummies(prior, p)
    X_star = np.vstack([X, X_d1, X_d2])
    Y_star = np.vstack([Y, Y_d1, Y_d2])
    theta, residues, rank, _ = np.linalg.lstsq(X_star, Y_star, rcond=None)
    if rank < X_star.shape[1]:
        raise np.linalg.LinAlgError("augmented normal equations are singular")
    return CoefficientSet(nu=theta[0], phi=theta[1:].T, beta=np.zeros((n, 0)))


# ---------------------------------------------------------------------------
# principal-component factor model


@dataclass
class FactorModel:
    mean: np.ndarray
    loadings: np.ndarray
    n_factors: int
    forecast_values: np.ndarray

    def forecast(self) -> np.ndarray:
        return self.forecast_values


def _ar_forecast_bic(f: np.ndarray, max_order: int, h: int) -> float:
    """Direct h-step forecast of one factor by a univariate AR, order by BIC."""
    T = f.shape[0]
    best = (np.inf, None, None)
    for q in range(max_order + 1):
        base = q + h - 1
        n = T - base
        if n < q + 2:
            continue
        X = np.column_stack(
            [np.ones(n)] + [f[base - h - lag + 1 : base - h - lag + 1 + n] for lag in range(1, q + 1)]
        )
        yresp = f[base:]
        coef, *_ = np.linalg.lstsq(X, yresp, rcond=None)
        resid = yresp - X @ coef
        s2 = float(resid @ resid) / n
        if s2 <= 0:
            s2 = 1e-300
        bic = np.log(s2) + np.log(n) * (q + 1) / n
        if bic < best[0]:
            best = (bic, q, coef)
    _, q, coef = best
    if q is None:
        return float(f.mean())
    tail = f[T - q : T][::-1] if q > 0 else np.empty(0)
    return float(coef[0] + (coef[1:] @ tail if q > 0 else 0.0))


def fit_factor_model(joint, variance_threshold: float = 0.95, h: int = 1,
                     max_ar_order: int = 4) -> FactorModel:
    """Reduced-rank forecaster: principal components capturing the requested
    share of total variance, each factor forecast by a univariate AR."""
    v = _values(joint)
    mean = v.mean(axis=0)
    centered = v - mean
    cov = centered.T @ centered / max(v.shape[0] - 1, 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    vals, vecs = np.maximum(vals[order], 0.0), vecs[:, order]
    total = vals.sum()
    if total <= 0:
        r = 1
    else:
        frac = np.cumsum(vals) / total
        r = int(np.searchsorted(frac, variance_threshold - 1e-12) + 1)
        r = min(r, len(vals))
    loadings = vecs[:, :r]
    factors = centered @ loadings
    fhat = np.array([_ar_forecast_bic(factors[:, i], max_ar_order, h) for i in range(r)])
    forecast = mean + loadings @ fhat
    return FactorModel(mean=mean, loadings=loadings, n_factors=r, forecast_values=forecast)


# ---------------------------------------------------------------------------
# refit-per-origin forecaster wrappers


class MeanForecaster:
    name = "mean"

    def forecast(self, endog_past, exog_past=None) -> np.ndarray:
        y = _values(endog_past)
        return forecast_sample_mean(y, y.shape[0])


class RandomWalkForecaster:
    name = "rw"

    def forecast(self, endog_past, exog_past=None) -> np.ndarray:
        y = _values(endog_past)
        return forecast_random_walk(y, y.shape[0])


class IcForecaster:
    """Least-squares VARX with lag orders reselected at every origin."""

    def __init__(self, p_max: int, s_max: int, criterion: str, h: int = 1):
        self.p_max = p_max
        self.s_max = s_max
        self.criterion = criterion
        self.h = h
        self.name = criterion.lower()
        self.last_selection: IcSelection | None = None

    def forecast(self, endog_past, exog_past=None) -> np.ndarray:
        y = _values(endog_past)
        x = _values(exog_past) if exog_past is not None else None
        s_max = self.s_max if x is not None else 0
        sel, coeffs = fit_ls_varx_ic(y, x, self.p_max, s_max, self.criterion, self.h)
        self.last_selection = sel
        tail_x = x[-max(sel.s_hat, 1) :] if sel.s_hat > 0 else None
        return forecast_direct(coeffs, y[-max(sel.p_hat, 1) :], tail_x)


BGR_DEFAULT_GRID = tuple(np.geomspace(0.01, 10.0, 10))


class BgrForecaster:
    """Joint VAR with the dummy-observation prior; forecasts only the first k series.

    The tightness is either fixed or selected once by rolling cross-validation
    on the squared error of the endogenous block, then held fixed.
    """

    def __init__(self, k: int, p: int, lam: float | None = None, delta: float = 0.0,
                 h: int = 1, grid: tuple[float, ...] = BGR_DEFAULT_GRID):
        self.k = k
        self.p = p
        self.lam = lam
        self.delta = delta
        self.h = h
        self.grid = grid
        self.name = "bgr"

    def _joint(self, endog_past, exog_past):
        y = _values(endog_past)
        if exog_past is None:
            return y
        return np.hstack([y, _values(exog_past)])

    def _forecast_at(self, joint: np.ndarray, lam: float) -> np.ndarray:
        prior = BgrPrior.estimate(joint, self.p, lam, self.delta)
        coeffs = fit_bgr(joint, self.p, prior, h=self.h)
        full = forecast_direct(coeffs, joint[-self.p :], None)
        return full[: self.k]

    def select_lambda(self, endog, exog=None) -> float:
        """Rolling-origin tightness selection on the training segment."""
        joint = self._joint(endog, exog)
        T = joint.shape[0]
        origins = cv_origins(T, self.h)
        best = (np.inf, self.grid[0])
        for lam in self.grid:
            sse = 0.0
            ok = True
            for t in origins:
                if t <= self.p + self.h - 1:
                    ok = False
                    break
                try:
                    yhat = self._forecast_at(joint[:t], lam)
                except np.linalg.LinAlgError:
                    ok = False
                    break
                err = joint[t + self.h - 1, : self.k] - yhat
                sse += float(err @ err)
            if ok and sse / len(origins) < best[0]:
                best = (sse / len(origins), lam)
        self.lam = best[1]
        return self.lam

    def forecast(self, endog_past, exog_past=None) -> np.ndarray:
        joint = self._joint(endog_past, exog_past)
        if self.lam is None:
            self.select_lambda(endog_past, exog_past)
        return self._forecast_at(joint, self.lam)


class FactorForecaster:
    name = "factor"

    def __init__(self, k: int, variance_threshold: float = 0.95, h: int = 1,
                 max_ar_order: int = 4):
        self.k = k
        self.variance_threshold = variance_threshold
        self.h = h
        self.max_ar_order = max_ar_order
        self.last_n_factors: int | None = None

    def forecast(self, endog_past, exog_past=None) -> np.ndarray:
        y = _values(endog_past)
        joint = y if exog_past is None else np.hstack([y, _values(exog_past)])
        model = fit_factor_model(joint, self.variance_threshold, self.h, self.max_ar_order)
        self.last_n_factors = model.n_factors
        return model.forecast()[: self.k]
