"""Local linear smoother against brute-force weighted least squares.

The closed-form weights in tvacov.locallinear are the foundation for every
estimator downstream, so they are checked here against a direct lstsq solve
of the same weighted regression, and the streaming hat trace is checked
against an explicitly assembled hat matrix.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

import tvacov.locallinear as ll
from tvacov.errors import ConfigurationError, SingularDesignError
from tvacov.kernels import epanechnikov
from tvacov.locallinear import (
    CurveOnGrid,
    fit_at_data,
    fit_curve,
    hat_trace,
    interior_grid,
    unit_grid,
    weight_matrix,
    weights,
)

KERN = epanechnikov()


def brute_force_fit(values, t, b, kernel):
    """Solve the local weighted regression directly with lstsq."""
    n = values.size
    d = unit_grid(n) - t
    kv = kernel(d / b)
    keep = kv > 0
    sw = np.sqrt(kv[keep])
    X = np.column_stack([np.ones(keep.sum()), d[keep]]) * sw[:, None]
    yw = values[keep] * sw
    beta, *_ = np.linalg.lstsq(X, yw, rcond=None)
    return beta  # (level, slope) at t


def test_weight_identities():
    # sum w_i = 1 and sum w_i (t_i - t) = 0 define local linear weights
    rng = np.random.default_rng(7)
    for _ in range(25):
        n = int(rng.integers(40, 400))
        b = float(rng.uniform(0.08, 0.45))
        t = float(rng.uniform(0.0, 1.0))
        w = weights(n, t, b, KERN)
        dense = w.dense()
        assert dense.size == n
        assert abs(dense.sum() - 1.0) < 1e-12
        assert abs(np.sum(dense * (unit_grid(n) - t))) < 1e-12


def test_weights_vanish_outside_window():
    w = weights(100, 0.5, 0.1, KERN)
    dense = w.dense()
    outside = np.abs(unit_grid(100) - 0.5) > 0.1
    assert np.all(dense[outside] == 0.0)
    assert dense[np.abs(unit_grid(100) - 0.5) < 0.1 - 1e-9].size > 0


def test_affine_functions_reproduced_exactly():
    # a local linear smoother is exact on affine inputs, any bandwidth
    for n in (50, 173, 400):
        t = unit_grid(n)
        vals = 1.75 - 0.6 * t
        for b in (0.15, 0.3):
            fit = fit_curve(vals, b, KERN, with_slope=True)
            assert_allclose(fit.values, 1.75 - 0.6 * fit.grid, atol=1e-10)
            assert_allclose(fit.slope, -0.6, atol=1e-9)


def test_matches_brute_force_wls():
    rng = np.random.default_rng(123)
    n = 200
    vals = rng.normal(size=n) + np.sin(2 * np.pi * unit_grid(n))
    for _ in range(20):
        b = float(rng.uniform(0.08, 0.45))
        t = float(rng.uniform(b, 1.0 - b))
        beta = brute_force_fit(vals, t, b, KERN)
        w = weights(n, t, b, KERN)
        assert abs(float(w.dense() @ vals) - beta[0]) < 1e-10
        fit = fit_curve(vals, b, KERN, grid=np.array([t]), with_slope=True)
        assert abs(fit.values[0] - beta[0]) < 1e-10
        assert abs(fit.slope[0] - beta[1]) < 1e-9


def test_one_sided_windows_near_boundary():
    rng = np.random.default_rng(5)
    vals = rng.normal(size=120)
    for t in (0.0, 0.02, 0.98, 1.0):
        beta = brute_force_fit(vals, t, 0.2, KERN)
        fit = fit_curve(vals, 0.2, KERN, grid=np.array([t]))
        assert abs(fit.values[0] - beta[0]) < 1e-10


def test_weight_matrix_stacks_single_point_weights():
    n = 90
    grid = np.array([0.2, 0.35, 0.5, 0.77])
    mat = weight_matrix(n, grid, 0.18, KERN)
    assert mat.shape == (4, n)
    for g, t in enumerate(grid):
        assert_allclose(mat[g], weights(n, float(t), 0.18, KERN).dense(),
                        rtol=0, atol=0)


def test_hat_trace_matches_explicit_hat_matrix():
    rng = np.random.default_rng(11)
    for n, b in ((60, 0.2), (150, 0.12)):
        H = weight_matrix(n, unit_grid(n), b, KERN)
        assert abs(hat_trace(n, b, KERN) - np.trace(H)) < 1e-10
        vals = rng.normal(size=n)
        fitted, trace = fit_at_data(vals, b, KERN)
        assert_allclose(fitted, H @ vals, atol=1e-12)
        assert abs(trace - np.trace(H)) < 1e-10


def test_chunked_evaluation_matches_unchunked(monkeypatch):
    # chunking only changes BLAS call shapes, so agreement is at ulp level
    vals = np.random.default_rng(2).normal(size=300)
    grid = interior_grid(300, 0.1)
    full = fit_curve(vals, 0.1, KERN, grid=grid)
    monkeypatch.setattr(ll, "_CHUNK_BUDGET", 900)  # forces 3-point chunks
    small = fit_curve(vals, 0.1, KERN, grid=grid)
    assert_allclose(small.values, full.values, rtol=1e-13, atol=1e-15)


def test_interior_grid():
    g = interior_grid(10, 0.25)
    # design points 0.1 .. 1.0; those in [0.25, 0.75]
    assert_allclose(g, np.array([0.3, 0.4, 0.5, 0.6, 0.7]))
    assert interior_grid(400, 0.2).min() >= 0.2
    assert interior_grid(400, 0.2).max() <= 0.8


def test_bandwidth_range_enforced():
    vals = np.zeros(50)
    for b in (0.0, -0.1, 0.5, 1.2):
        with pytest.raises(ConfigurationError):
            fit_curve(vals, b, KERN)


def test_tiny_window_raises():
    # n*b too small to engage 4 points for a line fit
    with pytest.raises(SingularDesignError):
        weights(20, 0.0, 0.05, KERN)


def test_curve_on_grid_validation():
    with pytest.raises(ConfigurationError):
        CurveOnGrid(grid=np.array([0.2, 0.2]), values=np.zeros(2))
    with pytest.raises(ConfigurationError):
        CurveOnGrid(grid=np.array([0.2, 1.4]), values=np.zeros(2))
    with pytest.raises(ConfigurationError):
        CurveOnGrid(grid=np.array([0.2, 0.4]), values=np.array([1.0, np.nan]))


def test_non_finite_series_rejected():
    vals = np.ones(80)
    vals[3] = np.inf
    with pytest.raises(ConfigurationError):
        fit_curve(vals, 0.2, KERN)
