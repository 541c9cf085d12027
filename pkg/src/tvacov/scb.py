"""Simultaneous confidence bands for the fitted curves.

Two constructions of the critical value are provided, both multiplying the
pointwise long-run scale sigma_hat(t):

* bootstrap: simulate the Gaussian proxy of the estimation error,
  sum_i w_i(t) u_i * scale with u_i iid N(0,1), take the empirical
  (1 - alpha) quantile of its sup over the band domain [b, 1-b]. The
  default scale 1/2 matches estimates of the form (fitted difference
  level)/2.
* gumbel: the limiting extreme-value formula; with m* = 1/b,

      crit = B(m*) - log(log(1-alpha)^(-1/2)) / sqrt(2 log m*),
      B(m*) = sqrt(2 log m*)
              + log((1/pi) sqrt(int K'^2 / (4 phi0))) / sqrt(2 log m*),

  and half-width sigma_hat(t) sqrt(phi0 / (4 n b)) crit.

Each bootstrap draw has its own counter-derived substream, so any partition
of the draws over workers reproduces the single-threaded quantile exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .acov import AcovEstimate
from .errors import (
    ConfigurationError,
    DegenerateVarianceError,
    GridAlignmentError,
)
from .kernels import Kernel
from .locallinear import CurveOnGrid, interior_grid, unit_grid, weight_matrix

__all__ = [
    "BootstrapQuantile",
    "BandResult",
    "proxy_draws",
    "bootstrap_quantile",
    "gumbel_critical",
    "build_band",
    "coverage_check",
]

_MIN_DRAWS = 1000
# Draws per matrix product; bounds memory without changing any result.
_DRAW_CHUNK = 512


def _draw_block(n: int, seed: int, lo: int, hi: int) -> np.ndarray:
    """Standard normal columns for draws lo..hi-1, one substream per draw."""
    u = np.empty((n, hi - lo))
    for d in range(lo, hi):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(d,)))
        u[:, d - lo] = rng.standard_normal(n)
    return u


def proxy_draws(
    n: int,
    b: float,
    kernel: Kernel,
    grid: np.ndarray,
    draws: int,
    seed: int,
    weight_scale: float = 0.5,
) -> np.ndarray:
    """Realizations of the Gaussian proxy process, shape (len(grid), draws).

    Column d is sum_i w_i(t) u_i^{(d)} * weight_scale on the grid, with
    u^{(d)} drawn from the substream keyed by d. Draw d never depends on the
    draw order or chunking.
    """
    if draws < 1:
        raise ConfigurationError("need at least one draw")
    grid = np.asarray(grid, dtype=float)
    w = weight_matrix(n, grid, b, kernel) * float(weight_scale)
    out = np.empty((grid.size, draws))
    for lo in range(0, draws, _DRAW_CHUNK):
        hi = min(lo + _DRAW_CHUNK, draws)
        out[:, lo:hi] = w @ _draw_block(n, seed, lo, hi)
    return out


@dataclass(frozen=True)
class BootstrapQuantile:
    """Empirical sup-quantile of the proxy process plus its context."""

    n: int
    bandwidth: float
    draws: int
    alpha: float
    seed: int
    weight_scale: float
    quantile: float
    grid: np.ndarray = field(repr=False)
    sup_draws: np.ndarray = field(repr=False)

    def quantile_at(self, alpha: float) -> float:
        """Re-read the stored draws at another level (type-7 empirical)."""
        if not 0.0 < alpha < 1.0:
            raise ConfigurationError("alpha must be in (0, 1)")
        return float(np.quantile(self.sup_draws, 1.0 - alpha))


def bootstrap_quantile(
    n: int,
    b: float,
    kernel: Kernel,
    draws: int = 10_000,
    alpha: float = 0.05,
    seed: int = 0,
    grid: np.ndarray | None = None,
    weight_scale: float = 0.5,
    threads: int = 1,
) -> BootstrapQuantile:
    """Simulate the band critical value q_hat for working length n.

    Parameters
    ----------
    n : int
        Working series length behind the fit.
    b : float
        Bandwidth; the sup runs over [b, 1-b].
    kernel : Kernel
    draws : int
        Number of proxy draws, >= 1000.
    alpha : float
        Band level is 1 - alpha.
    seed : int
        Root seed; draw d uses the substream keyed by d.
    grid : ndarray, optional
        Sup grid; default design points within [b, 1-b].
    weight_scale : float
        Linear coefficient of the proxy (1/2 for half-difference targets).
    threads : int
        Worker threads over disjoint draw blocks. Draw d is a pure function
        of (seed, d), so the result is bit-identical for every thread count.
    """
    if draws < _MIN_DRAWS:
        raise ConfigurationError(f"draws must be >= {_MIN_DRAWS}, got {draws}")
    if not 0.0 < alpha < 1.0:
        raise ConfigurationError("alpha must be in (0, 1)")
    if threads < 1:
        raise ConfigurationError("threads must be >= 1")
    if grid is None:
        grid = interior_grid(n, b)
        if grid.size == 0:
            raise ConfigurationError("no design points inside [b, 1-b]")
    grid = np.asarray(grid, dtype=float)
    if grid[0] < b - 1e-12 or grid[-1] > 1.0 - b + 1e-12:
        raise ConfigurationError("sup grid must lie inside [b, 1-b]")

    sups = np.empty(draws)
    w = weight_matrix(n, grid, b, kernel) * float(weight_scale)
    blocks = [
        (lo, min(lo + _DRAW_CHUNK, draws))
        for lo in range(0, draws, _DRAW_CHUNK)
    ]

    def fill(block: tuple[int, int]) -> None:
        lo, hi = block
        sups[lo:hi] = np.abs(w @ _draw_block(n, seed, lo, hi)).max(axis=0)

    if threads == 1:
        for block in blocks:
            fill(block)
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, blocks))
    q = float(np.quantile(sups, 1.0 - alpha))
    return BootstrapQuantile(
        n=n,
        bandwidth=float(b),
        draws=draws,
        alpha=float(alpha),
        seed=seed,
        weight_scale=float(weight_scale),
        quantile=q,
        grid=grid,
        sup_draws=sups,
    )


def gumbel_critical(b: float, kernel: Kernel, alpha: float, n: int) -> float:
    """The limiting critical multiplier; half-width is
    sigma_hat(t) * sqrt(phi0 / (4 n b)) * multiplier.

    Requires b < 1/e so that log(m*) with m* = 1/b exceeds 1.
    """
    b = float(b)
    if not 0.0 < b < 1.0 / math.e:
        raise ConfigurationError(
            f"the limit formula needs 0 < b < 1/e, got b={b!r}"
        )
    if not 0.0 < alpha < 1.0:
        raise ConfigurationError("alpha must be in (0, 1)")
    if n < 2:
        raise ConfigurationError("n must be >= 2")
    two_log_m = -2.0 * math.log(b)
    s = math.sqrt(two_log_m)
    bk = s + math.log(math.sqrt(kernel.roughness / (4.0 * kernel.phi0)) / math.pi) / s
    tail = -0.5 * math.log1p(-alpha)  # log (1-alpha)^(-1/2)
    return bk - math.log(tail) / s


@dataclass(frozen=True)
class BandResult:
    """A simultaneous band: center +- sigma_factor * sigma_hat pointwise."""

    lag: int
    grid: np.ndarray
    center: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    sigma: np.ndarray
    sigma_factor: float
    method: str
    alpha: float
    bandwidth: float
    working_n: int

    def __post_init__(self) -> None:
        if np.any(self.lower > self.center) or np.any(self.center > self.upper):
            raise ConfigurationError("band ordering violated")

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def mean_width(self) -> float:
        return float(np.mean(self.width))


def build_band(
    estimate: AcovEstimate,
    sigma: CurveOnGrid,
    kernel: Kernel,
    method: str = "bootstrap",
    alpha: float = 0.05,
    draws: int = 10_000,
    seed: int = 0,
    weight_scale: float = 0.5,
    quantile: BootstrapQuantile | None = None,
    threads: int = 1,
) -> BandResult:
    """Wrap a fitted curve in a simultaneous (1 - alpha) band.

    ``sigma`` must be evaluated on exactly the estimate's grid and be
    strictly positive there. A precomputed ``quantile`` may be supplied; its
    context (n, b, level, scale, grid) must match.
    """
    curve = estimate.curve
    if not np.array_equal(curve.grid, sigma.grid):
        raise GridAlignmentError("sigma and estimate grids differ")
    if np.any(sigma.values <= 0.0):
        raise DegenerateVarianceError(
            "sigma must be strictly positive on the band domain"
        )
    n = estimate.working_n
    b = estimate.bandwidth
    if method == "bootstrap":
        if quantile is None:
            quantile = bootstrap_quantile(
                n,
                b,
                kernel,
                draws=draws,
                alpha=alpha,
                seed=seed,
                grid=curve.grid,
                weight_scale=weight_scale,
                threads=threads,
            )
        else:
            ctx = (
                quantile.n == n
                and quantile.bandwidth == b
                and quantile.alpha == alpha
                and quantile.weight_scale == weight_scale
                and np.array_equal(quantile.grid, curve.grid)
            )
            if not ctx:
                raise ConfigurationError(
                    "supplied quantile was computed for a different context"
                )
        factor = quantile.quantile
    elif method == "gumbel":
        crit = gumbel_critical(b, kernel, alpha, n)
        factor = weight_scale * math.sqrt(kernel.phi0 / (n * b)) * crit
    else:
        raise ConfigurationError(f"unknown band method {method!r}")

    half = factor * sigma.values
    return BandResult(
        lag=estimate.lag,
        grid=curve.grid,
        center=curve.values,
        lower=curve.values - half,
        upper=curve.values + half,
        sigma=sigma.values,
        sigma_factor=float(factor),
        method=method,
        alpha=float(alpha),
        bandwidth=float(b),
        working_n=n,
    )


def coverage_check(band: BandResult, truth: CurveOnGrid) -> bool:
    """True iff the true curve lies inside the band at every grid point."""
    if not np.array_equal(band.grid, truth.grid):
        raise GridAlignmentError("truth grid does not match the band grid")
    tv = truth.values
    return bool(np.all((band.lower <= tv) & (tv <= band.upper)))
