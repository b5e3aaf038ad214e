"""Data model, lagged design construction, forecasting, and stationarity utilities.

Conventions used throughout the package:

* series are stored time-major, shape ``(T, n)``;
* a coefficient matrix ``B = [phi, beta]`` has shape ``(k, k*p + m*s)`` with
  per-lag blocks concatenated in lag order;
* regression matrices are column-per-observation: ``Y`` is ``(k, T_eff)`` and
  ``Z`` is ``(k*p + m*s, T_eff)``, with ``Y ~ nu 1' + B Z``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

__all__ = [
    "VarxSpec",
    "MultivariateSeries",
    "CoefficientSet",
    "LaggedDesign",
    "standardize",
    "build_lagged_design",
    "recover_intercept",
    "forecast_direct",
    "least_squares_objective",
    "companion_spectral_radius",
    "load_csv",
]


@dataclass(frozen=True)
class VarxSpec:
    """Model dimensions: k endogenous and m exogenous series, lag orders (p, s),
    forecast horizon h."""

    k: int
    m: int = 0
    p: int = 1
    s: int = 0
    h: int = 1

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.s < 0 or self.m < 0:
            raise ValueError("m and s must be >= 0")
        if (self.m == 0) != (self.s == 0):
            raise ValueError("m == 0 requires s == 0 and vice versa")
        if self.h < 1:
            raise ValueError("h must be >= 1")

    @property
    def n_regressors(self) -> int:
        return self.k * self.p + self.m * self.s

    @property
    def n_params(self) -> int:
        """Total regression parameters including the intercept: k(1 + kp + ms)."""
        return self.k * (1 + self.n_regressors)

    @property
    def max_lag(self) -> int:
        return max(self.p, self.s)


def _as_matrix(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2D array of shape (T, n)")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and one column")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class MultivariateSeries:
    """A T x n block of observations, rows indexed by time."""

    values: np.ndarray
    labels: tuple[str, ...] | None = None
    times: tuple | None = None

    def __post_init__(self) -> None:
        arr = _as_matrix(self.values, "values")
        object.__setattr__(self, "values", arr)
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != arr.shape[1]:
                raise ValueError("labels length must match the number of columns")
            object.__setattr__(self, "labels", labels)
        if self.times is not None:
            times = tuple(self.times)
            if len(times) != arr.shape[0]:
                raise ValueError("times length must match the number of rows")
            object.__setattr__(self, "times", times)

    @property
    def n_obs(self) -> int:
        return self.values.shape[0]

    @property
    def n_series(self) -> int:
        return self.values.shape[1]


def _series_values(series, name: str) -> np.ndarray:
    if isinstance(series, MultivariateSeries):
        return series.values
    return _as_matrix(series, name)


@dataclass(frozen=True)
class CoefficientSet:
    """Intercept nu (k,), endogenous block phi (k, k*p), exogenous block beta (k, m*s)."""

    nu: np.ndarray
    phi: np.ndarray
    beta: np.ndarray

    def __post_init__(self) -> None:
        nu = np.atleast_1d(np.asarray(self.nu, dtype=float))
        phi = np.atleast_2d(np.asarray(self.phi, dtype=float))
        beta = np.asarray(self.beta, dtype=float)
        if beta.size == 0:
            beta = np.zeros((phi.shape[0], 0))
        beta = np.atleast_2d(beta)
        k = nu.shape[0]
        if phi.shape[0] != k or beta.shape[0] != k:
            raise ValueError("nu, phi, and beta must agree on the number of equations")
        if phi.shape[1] % k != 0:
            raise ValueError("phi must stack k x k lag blocks, got shape %s" % (phi.shape,))
        for block in (nu, phi, beta):
            if not np.all(np.isfinite(block)):
                raise ValueError("coefficients must be finite")
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "beta", beta)

    @property
    def k(self) -> int:
        return self.nu.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        """The stacked coefficient matrix B = [phi, beta]."""
        return np.hstack([self.phi, self.beta])

    @classmethod
    def from_matrix(cls, nu: np.ndarray, B: np.ndarray, spec: VarxSpec) -> "CoefficientSet":
        B = np.atleast_2d(np.asarray(B, dtype=float))
        if B.shape != (spec.k, spec.n_regressors):
            raise ValueError(
                f"B must have shape ({spec.k}, {spec.n_regressors}), got {B.shape}"
            )
        return cls(nu=nu, phi=B[:, : spec.k * spec.p], beta=B[:, spec.k * spec.p :])


@dataclass
class LaggedDesign:
    """Column-per-observation regression pair (Y, Z) with stored centering means.

    Column t of ``Z`` stacks ``[y'_{t-h}, ..., y'_{t-h-p+1}, x'_{t-h}, ..., x'_{t-h-s+1}]``
    for response column ``y_t``, i.e. the one-step layout shifted back by h - 1
    extra observations for direct multi-step fitting.
    """

    Z: np.ndarray
    Y: np.ndarray
    y_bar: np.ndarray
    z_bar: np.ndarray
    spec: VarxSpec
    centered: bool = True
    offset: np.ndarray | None = None

    @property
    def t_eff(self) -> int:
        return self.Y.shape[1]


def standardize(series) -> tuple[MultivariateSeries, np.ndarray, np.ndarray]:
    """Scale every column to sample mean 0 and sample standard deviation 1.

    Returns the standardized series plus the per-column means and sds needed to
    map forecasts back to the original scale.
    """
    values = _series_values(series, "series")
    if values.shape[0] < 2:
        raise ValueError("standardize requires at least two observations")
    means = values.mean(axis=0)
    sds = values.std(axis=0, ddof=1)
    bad = np.flatnonzero(sds == 0.0)
    if bad.size:
        labels = getattr(series, "labels", None)
        name = labels[bad[0]] if labels else f"column {bad[0]}"
        raise ValueError(f"cannot standardize constant series: {name}")
    out = (values - means) / sds
    labels = series.labels if isinstance(series, MultivariateSeries) else None
    times = series.times if isinstance(series, MultivariateSeries) else None
    return MultivariateSeries(out, labels=labels, times=times), means, sds


def build_lagged_design(
    endog,
    exog=None,
    spec: VarxSpec | None = None,
    h: int | None = None,
    center: bool = True,
) -> LaggedDesign:
    """Assemble the (Y, Z) regression pair for a direct h-step VARX fit.

    The first ``max(p, s) + h - 1`` observations condition the design, so
    ``T_eff = T - max(p, s) - h + 1``.
    """
    if spec is None:
        raise ValueError("spec is required")
    y = _series_values(endog, "endog")
    if y.shape[1] != spec.k:
        raise ValueError(f"endog has {y.shape[1]} columns, spec.k = {spec.k}")
    if spec.m > 0:
        if exog is None:
            raise ValueError("spec requests exogenous lags but no exogenous data given")
        x = _series_values(exog, "exog")
        if x.shape[1] != spec.m:
            raise ValueError(f"exog has {x.shape[1]} columns, spec.m = {spec.m}")
        if x.shape[0] != y.shape[0]:
            raise ValueError("endog and exog must cover the same time span")
    else:
        x = None
    if h is None:
        h = spec.h
    if h < 1:
        raise ValueError("h must be >= 1")

    T = y.shape[0]
    base = spec.max_lag + h - 1
    t_eff = T - base
    if t_eff < 1:
        raise ValueError(
            f"series too short: need at least {base + 1} observations for "
            f"p={spec.p}, s={spec.s}, h={h}, got {T}"
        )

    Y = y[base:].T
    blocks = []
    for lag in range(1, spec.p + 1):
        lo = base - h - lag + 1
        blocks.append(y[lo : lo + t_eff].T)
    if x is not None:
        for lag in range(1, spec.s + 1):
            lo = base - h - lag + 1
            blocks.append(x[lo : lo + t_eff].T)
    Z = np.vstack(blocks) if blocks else np.zeros((0, t_eff))

    if center:
        y_bar = Y.mean(axis=1)
        z_bar = Z.mean(axis=1)
        Y = Y - y_bar[:, None]
        Z = Z - z_bar[:, None]
    else:
        y_bar = np.zeros(spec.k)
        z_bar = np.zeros(Z.shape[0])
    return LaggedDesign(Z=Z, Y=Y, y_bar=y_bar, z_bar=z_bar, spec=spec, centered=center)


def recover_intercept(B: np.ndarray, y_bar: np.ndarray, z_bar: np.ndarray) -> np.ndarray:
    """Unpenalized intercept of a fit on centered data: nu = y_bar - B z_bar."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    y_bar = np.asarray(y_bar, dtype=float)
    z_bar = np.asarray(z_bar, dtype=float)
    if B.shape != (y_bar.shape[0], z_bar.shape[0]):
        raise ValueError("dimension mismatch between B, y_bar, and z_bar")
    return y_bar - B @ z_bar


def forecast_direct(coeffs: CoefficientSet, endog_tail, exog_tail=None) -> np.ndarray:
    """Direct forecast nu + sum_l phi_l y_{t-l+1} + sum_j beta_j x_{t-j+1}.

    ``endog_tail`` holds the most recent observations in time order (last row
    = most recent).  The horizon never appears here: it is baked into the
    fitted coefficients through the gapped design.
    """
    y = _series_values(endog_tail, "endog_tail")
    k = coeffs.k
    p = coeffs.phi.shape[1] // k if coeffs.phi.shape[1] else 0
    if y.shape[0] < p:
        raise ValueError(f"endog_tail must contain at least p={p} observations")
    out = coeffs.nu.copy()
    for lag in range(1, p + 1):
        out = out + coeffs.phi[:, (lag - 1) * k : lag * k] @ y[-lag]
    ms = coeffs.beta.shape[1]
    if ms:
        if exog_tail is None:
            raise ValueError("coefficients include exogenous terms but no exog_tail given")
        x = _series_values(exog_tail, "exog_tail")
        m = x.shape[1]
        s = ms // m
        if x.shape[0] < s:
            raise ValueError(f"exog_tail must contain at least s={s} observations")
        for lag in range(1, s + 1):
            out = out + coeffs.beta[:, (lag - 1) * m : lag * m] @ x[-lag]
    return out


def least_squares_objective(design: LaggedDesign, B: np.ndarray) -> float:
    """Half squared Frobenius residual: 0.5 * ||Y - B Z||_F^2."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    resid = design.Y - B @ design.Z
    return 0.5 * float(np.sum(resid * resid))


def companion_spectral_radius(phi: np.ndarray) -> float:
    """Spectral radius of the companion matrix of [phi_1, ..., phi_p].

    A value below one certifies that the lag polynomial generates a stationary
    process.
    """
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    k = phi.shape[0]
    if phi.shape[1] % k != 0 or phi.shape[1] == 0:
        raise ValueError("phi must have shape (k, k*p) with p >= 1")
    p = phi.shape[1] // k
    comp = np.zeros((k * p, k * p))
    comp[:k, :] = phi
    if p > 1:
        comp[k:, : k * (p - 1)] = np.eye(k * (p - 1))
    return float(np.max(np.abs(np.linalg.eigvals(comp))))


def load_csv(path) -> MultivariateSeries:
    """Read a series from CSV: header row of names, one row per time step.

    A leading time column is auto-detected by non-numeric content and kept as
    time stamps.  Decimal point '.', delimiter ','.
    """
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and any(cell.strip() for cell in row)]
    if len(rows) < 2:
        raise ValueError(f"{path}: need a header row and at least one data row")
    header = [cell.strip() for cell in rows[0]]
    body = rows[1:]

    def _is_number(cell: str) -> bool:
        try:
            float(cell)
            return True
        except ValueError:
            return False

    has_time = not _is_number(body[0][0].strip())
    times = None
    if has_time:
        times = tuple(row[0].strip() for row in body)
        header = header[1:]
        body = [row[1:] for row in body]
    values = np.empty((len(body), len(header)))
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise ValueError(f"{path}: row {i + 2} has {len(row)} fields, expected {len(header)}")
        for j, cell in enumerate(row):
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise ValueError(
                    f"{path}: non-numeric value {cell!r} in row {i + 2}, column {header[j]!r}"
                ) from None
    return MultivariateSeries(values, labels=tuple(header), times=times)
