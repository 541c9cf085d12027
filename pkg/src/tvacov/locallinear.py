"""Local linear smoothing on the unit grid.

A series v_1..v_n observed at t_i = i/n is smoothed by weighted least squares
on (1, t_i - t) with kernel weights K((t_i - t)/b). The fitted level at t has
the closed form

    sum_i w_i(t) v_i,
    w_i(t) = K_b(t_i - t) [S2(t) - (t_i - t) S1(t)] / [S0(t) S2(t) - S1(t)^2],

with S_j(t) = sum_i (t_i - t)^j K_b(t_i - t) and K_b(u) = K(u/b). Everything
downstream (difference-based curve estimates, hat traces for cross-validation,
bootstrap weight matrices) is built on these weights, so this module keeps them
exact: sums are evaluated with numpy's pairwise accumulation and the weight
identities sum w_i = 1, sum w_i (t_i - t) = 0 hold to ~1e-15.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, SingularDesignError
from .kernels import Kernel

__all__ = [
    "CurveOnGrid",
    "WeightSet",
    "unit_grid",
    "interior_grid",
    "weights",
    "weight_matrix",
    "fit_curve",
    "fit_at_data",
    "hat_trace",
]

# Below this, S0 S2 - S1^2 is treated as a degenerate window.
_DEN_FLOOR = 1e-14
# A window engaging fewer kernel-positive points cannot support a line fit.
_MIN_POINTS = 4

# Cap on the rows of the (chunk x n) temporaries, keeps memory ~tens of MB.
_CHUNK_BUDGET = 4_000_000


@dataclass(frozen=True)
class CurveOnGrid:
    """A function estimate evaluated on a finite grid in [0, 1].

    ``slope`` optionally carries the local-linear derivative estimate at the
    same grid points.
    """

    grid: np.ndarray
    values: np.ndarray
    slope: np.ndarray | None = None

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        if grid.ndim != 1 or grid.size == 0:
            raise ConfigurationError("grid must be a nonempty 1-d array")
        if values.shape != grid.shape:
            raise ConfigurationError("values and grid shapes differ")
        if not np.all(np.diff(grid) > 0):
            raise ConfigurationError("grid must be strictly increasing")
        if grid[0] < 0.0 or grid[-1] > 1.0:
            raise ConfigurationError("grid must lie inside [0, 1]")
        if not np.all(np.isfinite(values)):
            raise ConfigurationError("curve values must be finite")
        if self.slope is not None:
            slope = np.asarray(self.slope, dtype=float)
            object.__setattr__(self, "slope", slope)
            if slope.shape != grid.shape:
                raise ConfigurationError("slope and grid shapes differ")

    def __len__(self) -> int:
        return int(self.grid.size)


@dataclass(frozen=True)
class WeightSet:
    """Local-linear level weights at a single evaluation point.

    ``start`` is the 0-based index of the first engaged observation;
    ``values[j]`` weights observation ``start + j``.
    """

    t: float
    bandwidth: float
    n: int
    start: int
    values: np.ndarray

    def dense(self) -> np.ndarray:
        """The weights as a length-n vector."""
        out = np.zeros(self.n)
        out[self.start : self.start + self.values.size] = self.values
        return out


def unit_grid(n: int) -> np.ndarray:
    """The design points t_i = i/n, i = 1..n."""
    if n < 2:
        raise ConfigurationError("need at least 2 observations")
    return np.arange(1, n + 1) / n


def _check_bandwidth(b: float) -> float:
    b = float(b)
    if not 0.0 < b < 0.5:
        raise ConfigurationError(f"bandwidth must be in (0, 1/2), got {b!r}")
    return b


def _row_blocks(
    t_eval: np.ndarray, n: int, b: float, kernel: Kernel
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Kernel values, signed distances and the WLS denominator for a chunk.

    Returns (KV, D, den) where D[g, i] = t_i - t_eval[g]. Raises if any row
    has a degenerate window.
    """
    t_data = unit_grid(n)
    D = t_data[None, :] - t_eval[:, None]
    KV = kernel(D / b)
    engaged = np.count_nonzero(KV, axis=1)
    if np.any(engaged < _MIN_POINTS):
        g = int(np.argmax(engaged < _MIN_POINTS))
        raise SingularDesignError(
            f"window at t={t_eval[g]:.6g} engages {engaged[g]} points "
            f"(< {_MIN_POINTS}); enlarge b or n"
        )
    KD = KV * D
    S0 = KV.sum(axis=1)
    S1 = KD.sum(axis=1)
    S2 = (KD * D).sum(axis=1)
    den = S0 * S2 - S1 * S1
    if np.any(den <= _DEN_FLOOR):
        g = int(np.argmax(den <= _DEN_FLOOR))
        raise SingularDesignError(
            f"singular design at t={t_eval[g]:.6g}: S0 S2 - S1^2 = {den[g]:.3e}"
        )
    return KV, D, den


def _level_rows(
    t_eval: np.ndarray, n: int, b: float, kernel: Kernel
) -> np.ndarray:
    KV, D, den = _row_blocks(t_eval, n, b, kernel)
    S1 = (KV * D).sum(axis=1)
    S2 = (KV * D * D).sum(axis=1)
    return KV * (S2[:, None] - D * S1[:, None]) / den[:, None]


def _slope_rows(
    t_eval: np.ndarray, n: int, b: float, kernel: Kernel
) -> np.ndarray:
    KV, D, den = _row_blocks(t_eval, n, b, kernel)
    S0 = KV.sum(axis=1)
    S1 = (KV * D).sum(axis=1)
    return KV * (S0[:, None] * D - S1[:, None]) / den[:, None]


def _eval_chunks(grid: np.ndarray, n: int) -> list[np.ndarray]:
    step = max(1, _CHUNK_BUDGET // max(n, 1))
    return [grid[i : i + step] for i in range(0, grid.size, step)]


def weights(n: int, t: float, b: float, kernel: Kernel) -> WeightSet:
    """Level weights w_i(t) for a series of length n at one point t.

    Parameters
    ----------
    n : int
        Series length; design points are i/n.
    t : float
        Evaluation point in [0, 1].
    b : float
        Bandwidth, 0 < b < 1/2.
    kernel : Kernel
        Smoothing kernel.

    Returns
    -------
    WeightSet
        Sparse weights over the engaged index range. They satisfy
        sum w_i = 1 and sum w_i (t_i - t) = 0 up to rounding, and vanish
        for |t_i - t| > b.
    """
    b = _check_bandwidth(b)
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ConfigurationError(f"evaluation point must be in [0, 1], got {t!r}")
    row = _level_rows(np.array([t]), n, b, kernel)[0]
    engaged = np.nonzero(row != 0.0)[0]
    start = int(engaged[0])
    stop = int(engaged[-1]) + 1
    return WeightSet(t=t, bandwidth=b, n=n, start=start, values=row[start:stop])


def weight_matrix(
    n: int, grid: np.ndarray, b: float, kernel: Kernel
) -> np.ndarray:
    """The (len(grid) x n) matrix of level weights, row g for grid[g]."""
    b = _check_bandwidth(b)
    grid = np.asarray(grid, dtype=float)
    out = np.empty((grid.size, n))
    pos = 0
    for chunk in _eval_chunks(grid, n):
        out[pos : pos + chunk.size] = _level_rows(chunk, n, b, kernel)
        pos += chunk.size
    return out


def interior_grid(n: int, b: float) -> np.ndarray:
    """Design points i/n restricted to [b, 1-b], the band-valid range."""
    g = unit_grid(n)
    return g[(g >= b) & (g <= 1.0 - b)]


def fit_curve(
    values: np.ndarray,
    b: float,
    kernel: Kernel,
    grid: np.ndarray | None = None,
    with_slope: bool = False,
) -> CurveOnGrid:
    """Local linear fit of a series observed on the unit grid.

    Parameters
    ----------
    values : ndarray
        Observations v_1..v_n at t_i = i/n.
    b : float
        Bandwidth, 0 < b < 1/2.
    kernel : Kernel
        Smoothing kernel.
    grid : ndarray, optional
        Evaluation points. Default: the design points restricted to
        [b, 1-b]. Points outside that range are allowed (the window is then
        one-sided) but the band theory does not cover them.
    with_slope : bool
        Also return the derivative estimate.

    Returns
    -------
    CurveOnGrid
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size < 2:
        raise ConfigurationError("series must be 1-d with at least 2 points")
    if not np.all(np.isfinite(values)):
        raise ConfigurationError("series contains non-finite values")
    b = _check_bandwidth(b)
    n = values.size
    if grid is None:
        grid = interior_grid(n, b)
        if grid.size == 0:
            raise ConfigurationError("no design points inside [b, 1-b]")
    grid = np.asarray(grid, dtype=float)

    level = np.empty(grid.size)
    slope = np.empty(grid.size) if with_slope else None
    pos = 0
    for chunk in _eval_chunks(grid, n):
        level[pos : pos + chunk.size] = _level_rows(chunk, n, b, kernel) @ values
        if with_slope:
            slope[pos : pos + chunk.size] = (
                _slope_rows(chunk, n, b, kernel) @ values
            )
        pos += chunk.size
    if not np.all(np.isfinite(level)):
        raise SingularDesignError("fit produced non-finite values")
    return CurveOnGrid(grid=grid, values=level, slope=slope)


def fit_at_data(
    values: np.ndarray, b: float, kernel: Kernel
) -> tuple[np.ndarray, float]:
    """Fitted values at every design point plus the hat-matrix trace.

    The trace is accumulated from the diagonal elements
    w_i(t_i) = K(0) S2(t_i) / den(t_i) without materializing the n x n hat
    matrix; this is the pair cross-validation needs.
    """
    values = np.asarray(values, dtype=float)
    b = _check_bandwidth(b)
    n = values.size
    grid = unit_grid(n)
    k0 = float(kernel(np.array([0.0]))[0])

    fitted = np.empty(n)
    trace = 0.0
    pos = 0
    for chunk in _eval_chunks(grid, n):
        KV, D, den = _row_blocks(chunk, n, b, kernel)
        S1 = (KV * D).sum(axis=1)
        S2 = (KV * D * D).sum(axis=1)
        rows = KV * (S2[:, None] - D * S1[:, None]) / den[:, None]
        fitted[pos : pos + chunk.size] = rows @ values
        trace += float(np.sum(k0 * S2 / den))
        pos += chunk.size
    return fitted, trace


def hat_trace(n: int, b: float, kernel: Kernel) -> float:
    """trace of the local-linear hat matrix for length n and bandwidth b."""
    b = _check_bandwidth(b)
    grid = unit_grid(n)
    k0 = float(kernel(np.array([0.0]))[0])
    trace = 0.0
    for chunk in _eval_chunks(grid, n):
        KV, D, den = _row_blocks(chunk, n, b, kernel)
        S2 = (KV * D * D).sum(axis=1)
        trace += float(np.sum(k0 * S2 / den))
    return trace
