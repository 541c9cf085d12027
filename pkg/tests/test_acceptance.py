"""End-to-end acceptance gate.

Each test is one numbered criterion with its tolerance pinned in the
assertion; the -v test line is the pass/fail record. Criteria 6 and 7 state
targets the implementation does not reach (see the failure messages for the
measured values); they are kept failing rather than loosened.
"""

import math

import numpy as np
import pytest

from tvacov.acov import estimate_gamma0
from tvacov.cli import main
from tvacov.kernels import epanechnikov
from tvacov.locallinear import (
    fit_at_data,
    fit_curve,
    hat_trace,
    interior_grid,
    unit_grid,
    weight_matrix,
)
from tvacov.lrv import ResidualPair, lrv_curve
from tvacov.procgen import MeanSpec, frozen_path, generate, model_preset, true_gamma
from tvacov.scb import bootstrap_quantile, gumbel_critical, proxy_draws
from tvacov.study import StudyConfig, run_naive_study, run_study

KERN = epanechnikov()


def test_criterion_01_model1_coverage():
    """Difference-based bands on the first benchmark: simultaneous coverage
    near the nominal 95% at n=400 with 200 replications."""
    rep = run_study(StudyConfig(model="model1", n=400, replications=200,
                                draws=2000))
    c0, c1 = rep.coverage[0], rep.coverage[1]
    assert 0.91 <= c0 <= 1.00, f"gamma0 coverage {c0:.3f} outside [0.91, 1.00]"
    assert 0.94 <= c1 <= 1.00, f"gamma1 coverage {c1:.3f} outside [0.94, 1.00]"


def test_criterion_02_model3_coverage():
    """Moving-average benchmark at n=800: coverage at least 0.90 / 0.93."""
    rep = run_study(StudyConfig(model="model3", n=800, replications=100,
                                draws=2000, h=3, b_h=0.3, b_k=0.3, m=8,
                                tau=0.3))
    c0, c1 = rep.coverage[0], rep.coverage[1]
    assert c0 >= 0.90, f"gamma0 coverage {c0:.3f} < 0.90"
    assert c1 >= 0.93, f"gamma1 coverage {c1:.3f} < 0.93"


def test_criterion_03_naive_bands_collapse_under_breaks():
    """Detrend-then-smooth bands on the broken-trend benchmark cover
    almost never."""
    rep = run_naive_study(StudyConfig(model="model1", n=400, replications=50,
                                      lags=(0,), draws=2000))
    c0 = rep.coverage[0]
    assert c0 < 0.10, f"naive gamma0 coverage {c0:.3f}, expected < 0.10"


def test_criterion_04_affine_exactness_and_weight_identities():
    """The smoother reproduces straight lines and its weights integrate to
    one with zero first moment."""
    for n in (50, 400):
        t = unit_grid(n)
        v = 0.8 - 1.7 * t
        for b in (0.15, 0.3):
            g = interior_grid(n, b)
            fit = fit_curve(v, b, KERN, grid=g)
            err = np.max(np.abs(fit.values - (0.8 - 1.7 * g)))
            assert err <= 1e-10, f"affine error {err:.2e} at n={n}, b={b}"
            w = weight_matrix(n, g, b, KERN)
            s0 = np.max(np.abs(w.sum(axis=1) - 1.0))
            s1 = np.max(np.abs(w @ t - g))
            assert s0 <= 1e-12, f"weight sum error {s0:.2e}"
            assert s1 <= 1e-12, f"weight moment error {s1:.2e}"


def test_criterion_05_weighted_least_squares_oracle():
    """Twenty random (t, b) fits match an explicit weighted regression, and
    the smoother trace matches an explicit hat matrix."""
    rng = np.random.default_rng(20240917)
    n = 200
    t = unit_grid(n)
    v = rng.normal(size=n)
    for _ in range(20):
        b = float(rng.uniform(0.1, 0.4))
        t0 = float(rng.uniform(b, 1.0 - b))
        x = np.column_stack([np.ones(n), t - t0])
        wts = KERN((t - t0) / b)
        sw = np.sqrt(wts)
        beta, *_ = np.linalg.lstsq(sw[:, None] * x, sw * v, rcond=None)
        ours = fit_curve(v, b, KERN, grid=np.array([t0])).values[0]
        assert abs(ours - beta[0]) <= 1e-10, (
            f"fit at t={t0:.3f}, b={b:.3f} off by {abs(ours - beta[0]):.2e}"
        )
    b = 0.25
    rows = []
    for t0 in t:
        x = np.column_stack([np.ones(n), t - t0])
        wts = KERN((t - t0) / b)
        xtw = x.T * wts
        rows.append(np.linalg.solve(xtw @ x, xtw @ np.eye(n))[0])
    explicit = np.trace(np.asarray(rows))
    ours = hat_trace(n, b, KERN)
    assert abs(ours - explicit) <= 1e-10, (
        f"hat trace {ours!r} vs explicit {explicit!r}"
    )
    fitted, tr = fit_at_data(v, b, KERN)
    np.testing.assert_allclose(fitted, np.asarray(rows) @ v, atol=1e-10)
    assert abs(tr - explicit) <= 1e-10


def test_criterion_06_lrv_identity_accuracy():
    """Long-run covariance of injected iid unit-variance residuals should be
    within 0.2 of the identity uniformly, in at least 45 of 50 seeds.

    The estimator is unbiased here, but its sampling noise at these block
    settings has a pointwise sd near 0.19, so a uniform 0.2 gate over the
    whole interior is rarely met; the count below records the honest rate.
    Symmetry and positive semidefiniteness must hold in every seed.
    """
    n, m, tau = 4000, 16, 0.2
    hits = 0
    psd_ok = True
    for s in range(50):
        rng = np.random.default_rng(s)
        pair = ResidualPair(eps=rng.standard_normal((n, 2)), lags=(3, 1))
        curve = lrv_curve(pair, m, tau, KERN)
        err = np.max(np.abs(curve.matrices - np.eye(2)))
        hits += err < 0.2
        sym = np.max(np.abs(curve.matrices - curve.matrices.transpose(0, 2, 1)))
        eigs = np.linalg.eigvalsh(curve.matrices)
        psd_ok = psd_ok and sym == 0.0 and eigs.min() >= -1e-12
    assert psd_ok, "symmetry / positive semidefiniteness violated"
    assert hits >= 45, (
        f"uniform 0.2 accuracy in {hits}/50 seeds, need >= 45"
    )


def test_criterion_07_bootstrap_matches_limit_formula():
    """The simulated band factor and the extreme-value formula should agree
    within 15% relative at n=400, b=0.25.

    The limit constant converges at rate 1/log(1/b); at b=0.25 that is still
    far out, and the measured gap is about 17%. Recorded as-is.
    """
    n, b, alpha = 400, 0.25, 0.05
    q = bootstrap_quantile(n, b, KERN, draws=10_000, alpha=alpha,
                           seed=0).quantile
    crit = gumbel_critical(b, KERN, alpha, n)
    limit = 0.5 * math.sqrt(KERN.phi0 / (n * b)) * crit
    rel = abs(q - limit) / limit
    assert rel <= 0.15, (
        f"bootstrap {q:.5f} vs limit {limit:.5f}: relative gap {rel:.3f}"
    )


def test_criterion_08_proxy_variance_matches_weights():
    """The simulated proxy's pointwise variance equals one quarter of the
    squared weight norm, within 5% at ten interior points."""
    n, b = 400, 0.2
    pts = np.linspace(b, 1.0 - b, 10)
    draws = proxy_draws(n, b, KERN, pts, draws=10_000, seed=77)
    w = weight_matrix(n, pts, b, KERN)
    target = 0.25 * np.sum(w * w, axis=1)
    rel = np.abs(draws.var(axis=1) - target) / target
    assert rel.max() < 0.05, f"max relative variance error {rel.max():.3f}"


def test_criterion_09_true_curves_match_monte_carlo():
    """Closed-form autocovariances agree with long frozen-time simulations
    to within three standard errors."""
    combos = 0
    for name in ("model1", "model3"):
        _, model = model_preset(name)
        L = model.order + 1
        for ti, t in enumerate((0.25, 0.5, 0.75)):
            path = frozen_path(model, t, 10**6, seed=900 + combos)
            x = path - path.mean()
            for lag in (0, 1):
                N = x.size - lag
                prods = x[lag:] * x[: x.size - lag]
                gam = float(prods.mean())
                centered = prods - prods.mean()
                s = centered @ centered / N
                for j in range(1, L + lag + 1):
                    s += 2.0 * (centered[j:] @ centered[:-j]) / N
                se = math.sqrt(max(s, 1e-30) / N)
                truth = true_gamma(model, lag, t)
                assert abs(gam - truth) <= 3.0 * se, (
                    f"{name} lag {lag} t={t}: mc {gam:.6f} vs "
                    f"true {truth:.6f}, se {se:.2e}"
                )
                combos += 1
    assert combos == 12


def test_criterion_10_manifest_reruns_are_byte_identical(tmp_path):
    """Re-running any writing command from its own manifest reproduces every
    output file exactly, regardless of the thread count."""
    e1, e2 = tmp_path / "e1", tmp_path / "e2"
    est = ["estimate", "--model", "model1", "--n", "300", "--seed", "5",
           "--lags", "0,1", "--h", "3", "--b-h", "0.2", "--b-k", "0.2",
           "--m", "4", "--tau", "0.2", "--draws", "2000"]
    assert main(est + ["--out", str(e1)]) == 0
    assert main(["estimate", "--config", str(e1 / "manifest.txt"),
                 "--threads", "3", "--out", str(e2)]) == 0
    for name in ("gamma0_band.csv", "gamma1_band.csv", "manifest.txt"):
        assert (e1 / name).read_bytes() == (e2 / name).read_bytes(), name

    s1, s2 = tmp_path / "s1", tmp_path / "s2"
    study = ["study", "--model", "model1", "--n", "150", "--reps", "4",
             "--draws", "1000", "--seed", "2"]
    assert main(study + ["--out", str(s1)]) == 0
    assert main(["study", "--config", str(s1 / "manifest.txt"),
                 "--threads", "3", "--out", str(s2)]) == 0
    for name in ("study_report.txt", "manifest.txt"):
        assert (s1 / name).read_bytes() == (s2 / name).read_bytes(), name


def test_criterion_11_trend_breaks_leave_the_estimate_alone():
    """Sharing the noise path, the variance estimate from the broken-trend
    series stays within 0.05 (sup norm) of the zero-mean twin's estimate in
    at least 90 of 100 paired seeds."""
    mean, model = model_preset("model1")
    zero = MeanSpec.zero()
    hits = 0
    for s in range(100):
        with_trend = generate(mean, model, 800, s)
        without = generate(zero, model, 800, s)
        a = estimate_gamma0(with_trend, 3, 0.2, KERN)
        b = estimate_gamma0(without, 3, 0.2, KERN)
        sup = float(np.max(np.abs(a.curve.values - b.curve.values)))
        hits += sup < 0.05
    assert hits >= 90, f"sup difference under 0.05 in {hits}/100 seeds"
