"""Acceptance criteria A1-A7, one PASS/FAIL line each in the terminal summary.

Each test records its line before asserting, so a failing criterion is
reported with the measured values instead of only a traceback.
"""
import math
import time

import numpy as np
import pytest

from smalldev import (AR1, IID, CoefficientWindow, Explicit, WeightSequence, build, constant_Bp,
                      constant_C, fit_decay_constant, materialize, spectrum)
from smalldev.cli import Pipeline
from smalldev.config import RunConfig
from smalldev.model import autocovariance, density_amplitude
from smalldev.smallball import (direct_sim_log_prob, eps_for_log_prob, saddlepoint_log_prob,
                                solve_saddle, tilted_mc_log_prob)
from smalldev.theory import predicted_log_smalldev

from conftest import ACCEPTANCE_LINES
from oracles import AR1_HALF_C, chi2_1_log_cdf, chi2_2_log_cdf


def record(label, passed, detail):
    ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")
    assert passed, detail


def test_A1_iid_calibration(iid_window, w1):
    t0 = time.perf_counter()
    s = spectrum(build(iid_window, w1, 1000))
    k = np.arange(1, 1001, dtype=float)
    expect = np.sort(np.concatenate([k ** -2.0, k ** -2.0]))[::-1]
    spec_err = float(np.max(np.abs(s.eigenvalues[:2000] - expect) / expect))
    zero_ok = s.eigenvalues.size == 2001 and s.eigenvalues[-1] == 0.0
    fit = fit_decay_constant(s, 1.0, (2, 2000), parity="even")
    C, meta = constant_C(iid_window, w1)
    ident = abs(C - meta["Delta_mu"] ** 2) / C
    elapsed = time.perf_counter() - t0
    ok = (spec_err <= 1e-12 and zero_ok and fit.C_hat == 4.0 and C == pytest.approx(4.0, rel=1e-12)
          and meta["Delta_mu"] == pytest.approx(2.0, rel=1e-12)
          and constant_Bp(1.0) == pytest.approx(math.pi ** 2 / 8, rel=1e-15)
          and ident <= 1e-10 and elapsed < 60)
    record("A1 iid calibration", ok,
           f"spectrum rel err {spec_err:.2e}, even-index C_hat={fit.C_hat!r}, C={C!r}, "
           f"Delta={meta['Delta_mu']!r}, identity err {ident:.1e}, {elapsed:.1f}s")


def test_A2_ar1_decay_constant(ar1_spectrum_2000, ar1_window, w1):
    C, meta = constant_C(ar1_window, w1, rel_tol=1e-10)
    fit = fit_decay_constant(ar1_spectrum_2000, 1.0, (200, 800))
    gap = abs(fit.C_hat / C - 1.0)
    oracle_err = abs(C / AR1_HALF_C - 1.0)
    record("A2 AR1 decay constant", gap <= 0.05 and oracle_err <= 1e-10,
           f"C_hat={fit.C_hat:.10g}, C={C:.15g} (oracle rel err {oracle_err:.1e}), "
           f"|C_hat/C-1|={gap:.2e} <= 0.05")


def test_A3_tilted_mc_closed_forms():
    worst = 0.0
    parts = []
    for lam, oracle in (([1.0], chi2_1_log_cdf), ([1.0, 1.0], chi2_2_log_cdf)):
        for eps in (0.5, 1.0):
            est = tilted_mc_log_prob(lam, eps, 1_000_000, seed=2024)
            z = abs(est.log_prob - oracle(eps)) / est.std_err
            worst = max(worst, z)
            parts.append(f"{len(lam)}x eps={eps}: z={z:.2f}")
    record("A3 tilted_mc vs closed forms", worst <= 3.0, ", ".join(parts))


def test_A3_saddlepoint_closed_forms():
    eps = 0.1
    parts = []
    ok = True
    for lam, oracle in (([1.0], chi2_1_log_cdf), ([1.0, 1.0], chi2_2_log_cdf)):
        sp = saddlepoint_log_prob(lam, eps).log_prob
        ref = oracle(eps)
        dlog = abs(sp - ref)
        dprob = abs(math.exp(sp) - math.exp(ref))
        ok &= dlog <= 0.02
        parts.append(f"{len(lam)}x |d lnP|={dlog:.4f} (|dP|={dprob:.1e})")
    record("A3 corrected saddlepoint within 0.02 of ln P at eps=0.1", ok, ", ".join(parts))


def test_A4_ratio_trend_truncated(ar1_spectrum_2000, ar1_window, w1):
    C, _ = constant_C(ar1_window, w1)
    ratios = []
    for eps in (0.2, 0.1, 0.05, 0.025):
        lp = saddlepoint_log_prob(ar1_spectrum_2000, eps).log_prob
        ratios.append(lp / predicted_log_smalldev(1.0, C, eps))
    dev = [abs(r - 1.0) for r in ratios]
    approaching = all(b < a for a, b in zip(dev, dev[1:]))
    ok = approaching and dev[-1] <= 0.15
    record("A4 ratio trend on truncated N=2000 spectrum", ok,
           "R=" + ", ".join(f"{r:.4f}" for r in ratios)
           + f"; approaching 1: {approaching}; |R(0.025)-1|={dev[-1]:.3f} <= 0.15")


def test_A5_dependence_matters(tmp_path):
    cfg = RunConfig(model=AR1(0.5), weights=WeightSequence(1.0), N_list=(50,),
                    eps_grid=(0.1,), output_dir=str(tmp_path))
    dc = Pipeline(cfg).theory()["dependence_comparison"]
    saved = (tmp_path / "constants.json").read_text()
    ok = dc["differs"] and dc["abs_difference"] > 5 * dc["combined_quadrature_tol"] \
        and "C_iid_matched_variance" in saved
    record("A5 dependence changes C at matched variance", ok,
           f"C_AR1={dc['C_dependent']:.10g}, C_iid={dc['C_iid_matched_variance']:.10g}, "
           f"diff={dc['abs_difference']:.3g} vs 5*tol={5 * dc['combined_quadrature_tol']:.2g}")


def test_A6_invariant_suite(ar1_spectrum_200, ar1_window, w1):
    checks = {}
    win = materialize(AR1(0.5), 1e-15)
    amp = density_amplitude(win, 256).amplitudes
    checks["parseval"] = abs(autocovariance(win, 0) - float(np.mean(amp ** 2))) \
        <= 1e-10 * autocovariance(win, 0)
    s = ar1_spectrum_200
    checks["trace"] = abs(float(np.sum(s.eigenvalues)) - s.frobenius_sq) <= 1e-10 * s.frobenius_sq
    w = WeightSequence(1.0, 1.0, 0.5)
    a = materialize(Explicit([1.0, -0.4, 0.3], -2))
    b = materialize(Explicit([1.0, -0.4, 0.3], 5))
    L = max(a.half_width, b.half_width)
    checks["shift"] = np.array_equal(spectrum(build(a, w, 40, L=L)).eigenvalues,
                                     spectrum(build(b, w, 40, L=L)).eigenvalues)
    s1 = spectrum(build(ar1_window, w1, 60)).eigenvalues
    s2 = spectrum(build(ar1_window.scaled(2.0), w1, 60)).eigenvalues
    checks["scale"] = np.array_equal(s2, 4.0 * s1)
    s3 = spectrum(build(ar1_window, w1, 70)).eigenvalues[:s1.size]
    checks["monotone_N"] = bool(np.all(s3 >= s1 - 1e-13 * s1[0]))
    lam = s.eigenvalues
    worst = 0.0
    for eps in (0.5, 0.2, 0.05, 0.01):
        t = solve_saddle(lam, eps)
        pos = lam[lam > 0]
        worst = max(worst, abs(float(np.sum(pos / (1 + 2 * t * pos))) - eps * eps) / (eps * eps))
    checks["saddle_residual"] = worst <= 1e-12
    r1 = tilted_mc_log_prob(lam, 0.3, 20_000, seed=99, workers=1)
    r4 = tilted_mc_log_prob(lam, 0.3, 20_000, seed=99, workers=4)
    d1 = direct_sim_log_prob(AR1(0.5), w1, 30, 1.5, 20_000, seed=99, workers=1)
    d3 = direct_sim_log_prob(AR1(0.5), w1, 30, 1.5, 20_000, seed=99, workers=3)
    checks["mc_reproducible"] = r1 == r4 and d1 == d3
    failed = [k for k, v in checks.items() if not v]
    record("A6 invariant suite", not failed,
           f"{len(checks) - len(failed)}/{len(checks)} hold" + (f"; failed {failed}" if failed else ""))


def test_A7_direct_vs_tilted(ar1_spectrum_200, w1):
    t0 = time.perf_counter()
    lam = ar1_spectrum_200.eigenvalues
    eps = eps_for_log_prob(lam, math.log(0.05))
    d = direct_sim_log_prob(AR1(0.5), w1, 200, eps, 100_000, seed=7)
    t = tilted_mc_log_prob(lam, eps, 100_000, seed=7)
    se = math.hypot(d.std_err, t.std_err)
    z = abs(d.log_prob - t.log_prob) / se
    p = math.exp(d.log_prob)
    elapsed = time.perf_counter() - t0
    ok = z <= 3.0 and 1e-2 <= p <= 1e-1 and elapsed < 120
    record("A7 direct_sim vs tilted_mc", ok,
           f"eps={eps:.4f}, P_direct={p:.4f}, ln P direct={d.log_prob:.4f}, "
           f"tilted={t.log_prob:.4f}, z={z:.2f}, {elapsed:.1f}s")


def test_supplement_ratio_with_tail_completion(ar1_spectrum_2000, ar1_window, w1):
    # not an acceptance criterion: the same ratios after appending the fitted
    # power-law tail beyond the truncation, as the verify command does
    from smalldev.operator import tail_completed_eigenvalues, tail_index_for

    C, _ = constant_C(ar1_window, w1)
    fit = fit_decay_constant(ar1_spectrum_2000, 1.0, (200, 800))
    lam = tail_completed_eigenvalues(ar1_spectrum_2000, fit, 1.0,
                                     tail_index_for(fit.C_hat, 1.0, 0.025))
    dev = []
    for eps in (0.2, 0.1, 0.05, 0.025):
        dev.append(abs(saddlepoint_log_prob(lam, eps).log_prob
                       / predicted_log_smalldev(1.0, C, eps) - 1.0))
    assert all(b < a for a, b in zip(dev, dev[1:]))
    assert dev[-1] <= 0.15
