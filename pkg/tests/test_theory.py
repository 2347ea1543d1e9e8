import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smalldev import (AR1, CoefficientWindow, Explicit, WeightSequence, constant_Bp, constant_C,
                      delta_mu, materialize, theory_constants)
from smalldev.exceptions import DomainError, NumericError
from smalldev.theory import amplitude_power_mean, predicted_eigenvalue, predicted_log_smalldev

from oracles import (AR1_HALF_C, AR1_HALF_MEAN_AMPLITUDE, ar1_mean_amplitude_elliptic,
                     ar1_mean_amplitude_mpmath, bp_mpmath)

coeff_lists = st.lists(st.floats(-2, 2, allow_nan=False), min_size=1, max_size=5).filter(
    lambda c: any(abs(x) > 0.1 for x in c))


class TestBp:
    def test_p_one(self):
        assert constant_Bp(1.0) == pytest.approx(math.pi ** 2 / 8, rel=1e-15)

    @pytest.mark.parametrize("p", [0.6, 0.75, 1.5, 2.0, 3.7])
    def test_against_mpmath(self, p):
        assert constant_Bp(p) == pytest.approx(bp_mpmath(p), rel=1e-13)

    def test_three_halves_frozen(self):
        assert constant_Bp(1.5) == pytest.approx(1.329679519094792898, rel=1e-14)

    @pytest.mark.parametrize("p", [0.5, 0.4, -1.0])
    def test_domain(self, p):
        with pytest.raises(DomainError):
            constant_Bp(p)


class TestConstantC:
    def test_iid(self, iid_window):
        for p in (1.0, 1.5, 0.75):
            C, meta = constant_C(iid_window, WeightSequence(p))
            assert C == pytest.approx(2.0 ** (2 * p), rel=1e-14)
            assert meta["Delta_mu"] == pytest.approx(2.0, rel=1e-14)

    def test_ar1_oracles_agree(self):
        assert ar1_mean_amplitude_mpmath(0.5) == pytest.approx(AR1_HALF_MEAN_AMPLITUDE, rel=1e-14)
        assert ar1_mean_amplitude_elliptic(0.5) == pytest.approx(AR1_HALF_MEAN_AMPLITUDE, rel=1e-14)

    def test_ar1_frozen(self, ar1_window, w1):
        C, meta = constant_C(ar1_window, w1)
        assert C == pytest.approx(AR1_HALF_C, rel=1e-10)
        assert meta["rel_err"] <= 1e-10

    @pytest.mark.parametrize("rho,p", [(0.8, 1.0), (-0.3, 2.0), (0.5, 0.75)])
    def test_ar1_other(self, rho, p):
        win = materialize(AR1(rho), 1e-16)
        C, _ = constant_C(win, WeightSequence(p))
        ref = 2.0 * ar1_mean_amplitude_mpmath(rho, power=1.0 / p)
        assert C == pytest.approx(ref ** (2 * p), rel=1e-9)

    def test_identity_C_delta(self, ar1_window):
        w = WeightSequence(1.5, 2.0, 0.3)
        C, meta = constant_C(ar1_window, w)
        assert C == pytest.approx(meta["Delta_mu"] ** 3.0, rel=1e-15)
        assert delta_mu(ar1_window, w) == pytest.approx(meta["Delta_mu"], rel=1e-15)

    def test_one_sided(self, iid_window):
        C, meta = constant_C(iid_window, WeightSequence(1.0, 1.0, 0.0))
        assert meta["Delta_mu"] == 1.0 and C == 1.0

    def test_symbol_with_zero(self):
        # |1 + e^{ix}| = 2|cos(x/2)|, whose mean is 4/pi
        quad = amplitude_power_mean(CoefficientWindow([1.0, 1.0]), 1.0, rel_tol=1e-6)
        assert quad.value == pytest.approx(4 / math.pi, rel=1e-6)

    def test_quadrature_budget(self):
        with pytest.raises(NumericError) as info:
            amplitude_power_mean(CoefficientWindow([1.0, 1.0]), 1.0, rel_tol=1e-14, max_grid=256)
        assert "grid_size" in info.value.diagnostics

    def test_prefix_override_ignored(self, ar1_window):
        a, _ = constant_C(ar1_window, WeightSequence(1.0))
        b, _ = constant_C(ar1_window, WeightSequence(1.0, 1.0, 1.0, {0: 9.0, 1: 0.0}))
        assert a == b

    def test_lr_warning(self, ar1_window):
        w = WeightSequence(0.75)
        with pytest.warns(RuntimeWarning):
            _, meta = constant_C(ar1_window, w, spec=_Uncertified([1.0, 0.5]))
        assert meta["lr_warning"]
        _, meta = constant_C(ar1_window, w, spec=AR1(0.5))
        assert not meta["lr_warning"]

    @settings(max_examples=30, deadline=None)
    @given(coeff_lists, st.integers(-8, 8), st.integers(-8, 8), st.floats(0.6, 2.5))
    def test_shift_and_reversal_invariance(self, c, o1, o2, p):
        w = WeightSequence(p, 1.0, 2.0)
        a = materialize(Explicit(c, o1))
        b = materialize(Explicit(c, o2))
        Ca, _ = constant_C(a, w, rel_tol=1e-9)
        Cb, _ = constant_C(b, w, rel_tol=1e-9)
        Cr, _ = constant_C(a.reversed(), w, rel_tol=1e-9)
        assert Ca == pytest.approx(Cb, rel=1e-8)
        assert Ca == pytest.approx(Cr, rel=1e-8)

    @settings(max_examples=30, deadline=None)
    @given(coeff_lists, st.floats(0.1, 10.0), st.floats(0.6, 2.5))
    def test_scale_covariance(self, c, s, p):
        w = WeightSequence(p)
        win = materialize(Explicit(c, 0))
        C1, _ = constant_C(win, w, rel_tol=1e-9)
        C2, _ = constant_C(win.scaled(s), w, rel_tol=1e-9)
        assert C2 == pytest.approx(s * s * C1, rel=1e-8)

    @given(st.floats(0.0, 3.0), st.floats(0.01, 2.0), st.floats(0.6, 2.5))
    def test_monotone_in_side_constants(self, d, inc, p):
        win = CoefficientWindow([1.0, 0.5])
        lo, _ = constant_C(win, WeightSequence(p, d + 0.01, 1.0), rel_tol=1e-8)
        hi, _ = constant_C(win, WeightSequence(p, d + 0.01 + inc, 1.0), rel_tol=1e-8)
        assert hi > lo


class _Uncertified(Explicit):
    lr_certified = False


def test_theory_constants_bundle(ar1_window, w1):
    tc = theory_constants(ar1_window, w1, spec=AR1(0.5))
    d = tc.to_dict()
    assert d["sd_exponent"] == 2.0 and d["p"] == 1.0
    assert d["B_p"] == pytest.approx(math.pi ** 2 / 8)
    assert d["C"] == pytest.approx(AR1_HALF_C, rel=1e-10)


class TestPredictions:
    def test_log_smalldev_example(self):
        assert predicted_log_smalldev(1.0, 4.0, 0.1) == pytest.approx(-50 * math.pi ** 2, rel=1e-14)
        assert predicted_log_smalldev(1.0, 4.0, 0.1) == pytest.approx(-493.48022, rel=1e-7)

    def test_eigenvalue(self):
        assert predicted_eigenvalue(10, 4.0, 1.0) == pytest.approx(0.04)
        np.testing.assert_allclose(predicted_eigenvalue([1, 2], 1.0, 1.5), [1.0, 2 ** -3.0])
        with pytest.raises(DomainError):
            predicted_eigenvalue(0, 1.0, 1.0)

    @pytest.mark.parametrize("eps,C", [(0.0, 1.0), (-1.0, 1.0), (0.1, 0.0)])
    def test_domain(self, eps, C):
        with pytest.raises(DomainError):
            predicted_log_smalldev(1.0, C, eps)

    @given(st.floats(0.01, 1.0), st.floats(1.01, 3.0))
    def test_exponent(self, eps, p):
        a = predicted_log_smalldev(p, 2.0, eps)
        b = predicted_log_smalldev(p, 2.0, eps / 2)
        assert b / a == pytest.approx(2.0 ** (2 / (2 * p - 1)), rel=1e-12)
