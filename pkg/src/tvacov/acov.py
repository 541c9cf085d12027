"""Difference-based curve estimates of time-varying autocovariance.

With beta_k(t) = E(y_i - y_{i-k})^2 = 2 gamma_0(t) - 2 gamma_k(t) for a lag
k beyond the dependence range h of the noise,

    gamma0_hat(t) = betahat_{h}(t) / 2,
    gammak_hat(t) = (betahat_{h}(t) - betahat_{k}(t)) / 2,   1 <= k < h,

where each betahat is a local-linear fit of the squared difference series.
Trends never enter except through the ~lag-many points straddling each level
shift, which is what makes these estimates jump-robust. The classical
residual-based estimator is provided for comparison; it inherits the full
bias of a smoothed trend fit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffseries import difference
from .errors import ConfigurationError, InvalidLagError
from .kernels import Kernel
from .locallinear import CurveOnGrid, fit_curve, interior_grid
from .procgen import TimeSeries
from .tuning import gcv_bandwidth

__all__ = [
    "AcovEstimate",
    "estimate_gamma0",
    "estimate_gammak",
    "naive_estimate",
]


@dataclass(frozen=True)
class AcovEstimate:
    """A fitted autocovariance curve and the settings that produced it.

    ``working_n`` is the effective sample length behind the fit (N - h for
    the difference-based estimates); the band machinery needs it.
    ``diff_lag`` is None for the residual-based estimator.
    ``has_negative`` flags sign violations of a nonnegative target (lag 0);
    values are reported as-is, never clipped.
    """

    lag: int
    curve: CurveOnGrid
    bandwidth: float
    working_n: int
    diff_lag: int | None
    has_negative: bool = False
    mean_bandwidth: float | None = None

    def __post_init__(self) -> None:
        if self.lag < 0:
            raise ConfigurationError("lag must be >= 0")
        if self.working_n < 2:
            raise ConfigurationError("working length must be >= 2")


def estimate_gamma0(
    y: TimeSeries,
    h: int,
    b: float,
    kernel: Kernel,
    grid: np.ndarray | None = None,
) -> AcovEstimate:
    """Time-varying variance estimate from the lag-h difference series.

    Parameters
    ----------
    y : TimeSeries
    h : int
        Truncation lag; the lag-h autocovariance must be negligible for the
        estimate to be unbiased.
    b : float
        Bandwidth for the local-linear fit.
    kernel : Kernel
    grid : ndarray, optional
        Evaluation points; default is the difference-series design grid
        restricted to [b, 1-b].
    """
    rho = difference(y, h)
    if grid is None:
        grid = interior_grid(rho.n, b)
    fit = fit_curve(rho.values, b, kernel, grid=grid)
    vals = 0.5 * fit.values
    return AcovEstimate(
        lag=0,
        curve=CurveOnGrid(grid=fit.grid, values=vals),
        bandwidth=float(b),
        working_n=rho.n,
        diff_lag=h,
        has_negative=bool(np.any(vals < 0.0)),
    )


def estimate_gammak(
    y: TimeSeries,
    k: int,
    h: int,
    b: float,
    kernel: Kernel,
    grid: np.ndarray | None = None,
) -> AcovEstimate:
    """Time-varying lag-k autocovariance from two difference series.

    Both the lag-h and the lag-k series are fitted with the same bandwidth b
    on their own unit grids and combined on the common evaluation grid:
    half their difference estimates gamma_k. Requires 1 <= k < h.
    """
    if not 1 <= k < h:
        raise InvalidLagError(f"need 1 <= k < h, got k={k}, h={h}")
    rho_h = difference(y, h)
    rho_k = difference(y, k)
    if grid is None:
        grid = interior_grid(rho_h.n, b)
    fit_h = fit_curve(rho_h.values, b, kernel, grid=grid)
    fit_k = fit_curve(rho_k.values, b, kernel, grid=grid)
    vals = 0.5 * (fit_h.values - fit_k.values)
    return AcovEstimate(
        lag=k,
        curve=CurveOnGrid(grid=np.asarray(grid, dtype=float), values=vals),
        bandwidth=float(b),
        working_n=rho_h.n,
        diff_lag=h,
        has_negative=False,
    )


def naive_estimate(
    y: TimeSeries,
    k: int,
    kernel: Kernel,
    b_mean: float | None = None,
    b_var: float | None = None,
    grid: np.ndarray | None = None,
    bandwidths: np.ndarray | None = None,
) -> AcovEstimate:
    """Residual-based autocovariance estimate (detrend, then smooth).

    The trend is fitted by a local-linear smoother (bandwidth ``b_mean``,
    cross-validated when omitted); the lag-k residual products are then
    smoothed again (bandwidth ``b_var``, likewise cross-validated). No
    differencing is involved: level shifts leak into the residuals over a
    full bandwidth neighborhood, and the tests document how badly the bands
    fail under jumps.
    """
    if k < 0 or k > y.n - 2:
        raise InvalidLagError(f"lag {k} invalid for length {y.n}")
    if b_mean is None:
        b_mean = gcv_bandwidth(y.values, bandwidths, kernel).bandwidth
    trend = fit_curve(y.values, b_mean, kernel, grid=y.grid)
    resid = y.values - trend.values
    if k == 0:
        prods = resid * resid
    else:
        prods = resid[k:] * resid[:-k]
    if b_var is None:
        b_var = gcv_bandwidth(prods, bandwidths, kernel).bandwidth
    m = prods.size
    if grid is None:
        grid = interior_grid(m, b_var)
    fit = fit_curve(prods, b_var, kernel, grid=grid)
    return AcovEstimate(
        lag=k,
        curve=fit,
        bandwidth=float(b_var),
        working_n=m,
        diff_lag=None,
        has_negative=bool(k == 0 and np.any(fit.values < 0.0)),
        mean_bandwidth=float(b_mean),
    )
