"""scikit-learn style wrappers around the spectral and small-ball routines.

Both estimators follow the usual contract: constructor arguments are stored
verbatim (so ``get_params``/``set_params``/``clone`` work), ``fit`` returns
``self`` and learned state lives in attributes with a trailing underscore.

>>> from smalldev import AR1, SpectralDecayEstimator
>>> est = SpectralDecayEstimator(p=1.0, N=200).fit(AR1(0.5))
>>> round(est.decay_constant_ / est.theory_.C, 2)
1.0
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .model import Explicit, MASpec, WeightSequence, materialize
from .operator import build, counting_function, fit_decay_constant, spectrum
from .smallball import (direct_sim_log_prob, saddlepoint_log_prob, tilted_mc_log_prob)
from .theory import DEFAULT_REL_TOL, predicted_log_smalldev, theory_constants


def _as_spec(X):
    if isinstance(X, MASpec):
        return X
    coeffs = check_array(X, ensure_2d=False, dtype=float).ravel()
    return Explicit(coeffs, 0)


class SpectralDecayEstimator(BaseEstimator):
    """Fit ``lambda_n ~ C n^{-2p}`` from the truncated Karhunen-Loeve spectrum.

    Parameters
    ----------
    p : float
        Weight exponent, ``p > 1/2``.
    d_plus, d_minus : float
        One-sided weight constants.
    N : int
        Truncation: rows ``|k| <= N``.
    fit_range : (int, int) or None
        Index window for the fit; ``None`` uses ``[N/10, 2N/5]``.
    parity : {"all", "even", "odd"}
    window_tol : float
        l2 tail tolerance for materializing the coefficients.
    quad_rel_tol : float
        Relative tolerance of the quadrature behind ``theory_``.

    Attributes
    ----------
    window_ : CoefficientWindow
    spectrum_ : Spectrum
    eigenvalues_ : ndarray
    decay_constant_ : float
        Fitted ``C_hat``.
    dispersion_ : float
        Interquartile range of ``lambda_n n^{2p}`` over the fit window.
    theory_ : TheoryConstants
    """

    def __init__(self, p=1.0, d_plus=1.0, d_minus=1.0, N=500, fit_range=None, parity="all",
                 window_tol=1e-14, quad_rel_tol=DEFAULT_REL_TOL):
        self.p = p
        self.d_plus = d_plus
        self.d_minus = d_minus
        self.N = N
        self.fit_range = fit_range
        self.parity = parity
        self.window_tol = window_tol
        self.quad_rel_tol = quad_rel_tol

    def _weights(self):
        return WeightSequence(self.p, self.d_plus, self.d_minus)

    def fit(self, X, y=None):
        """Build the operator for model ``X`` and fit the decay constant.

        ``X`` is an :class:`~smalldev.model.MASpec` or a 1-D array of
        coefficients ``a_0, a_1, ...``.
        """
        spec = _as_spec(X)
        w = self._weights()
        self.window_ = materialize(spec, self.window_tol)
        self.spectrum_ = spectrum(build(self.window_, w, self.N))
        self.eigenvalues_ = self.spectrum_.eigenvalues
        self.fit_ = fit_decay_constant(self.spectrum_, self.p, self.fit_range, self.parity)
        self.decay_constant_ = self.fit_.C_hat
        self.dispersion_ = self.fit_.dispersion
        self.theory_ = theory_constants(self.window_, w, self.quad_rel_tol, spec=spec)
        return self

    def predict(self, n):
        """Power-law eigenvalues ``C_hat n^{-2p}`` at indices ``n``."""
        check_is_fitted(self, "decay_constant_")
        n = np.asarray(n, dtype=float)
        return self.decay_constant_ * n ** (-2.0 * self.p)

    def counting(self, s):
        check_is_fitted(self, "spectrum_")
        return counting_function(self.spectrum_, s)

    def score(self, X=None, y=None):
        """Negative relative gap ``-|C_hat/C - 1|`` (higher is better)."""
        check_is_fitted(self, "decay_constant_")
        return -abs(self.decay_constant_ / self.theory_.C - 1.0)


class SmallDevEstimator(BaseEstimator):
    """Estimate ``ln P(sum lambda_n xi_n^2 <= eps^2)`` for a fitted spectrum.

    ``fit`` takes the eigenvalues (array or Spectrum); ``predict`` maps an
    array of levels ``eps`` to log-probabilities.
    """

    def __init__(self, method="saddlepoint", order="corrected", n_samples=100_000, seed=0,
                 n_jobs=None):
        self.method = method
        self.order = order
        self.n_samples = n_samples
        self.seed = seed
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        lam = getattr(X, "eigenvalues", X)
        lam = check_array(lam, ensure_2d=False, dtype=float, ensure_all_finite=True).ravel()
        if np.any(lam < 0):
            raise ValueError("eigenvalues must be nonnegative")
        if self.method not in ("saddlepoint", "tilted_mc"):
            raise ValueError(f"method must be 'saddlepoint' or 'tilted_mc', got {self.method!r}")
        self.lambdas_ = np.sort(lam)[::-1]
        self.n_features_in_ = 1
        return self

    def estimate(self, eps):
        check_is_fitted(self, "lambdas_")
        if self.method == "saddlepoint":
            return saddlepoint_log_prob(self.lambdas_, eps, self.order)
        return tilted_mc_log_prob(self.lambdas_, eps, self.n_samples, self.seed, self.n_jobs)

    def predict(self, eps):
        eps = np.atleast_1d(np.asarray(eps, dtype=float))
        return np.array([self.estimate(float(e)).log_prob for e in eps])

    def predict_ratio(self, eps, p, C):
        """Ratio of the estimate to ``-B_p (C/eps^2)^{1/(2p-1)}``."""
        eps = np.atleast_1d(np.asarray(eps, dtype=float))
        pred = np.array([predicted_log_smalldev(p, C, float(e)) for e in eps])
        return self.predict(eps) / pred


def simulate_log_prob(spec, p, N, eps, n_samples=100_000, seed=0, d_plus=1.0, d_minus=1.0):
    """Convenience wrapper for direct simulation from a model spec."""
    return direct_sim_log_prob(_as_spec(spec), WeightSequence(p, d_plus, d_minus), N, eps,
                               n_samples, seed)
