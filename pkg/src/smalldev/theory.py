"""Closed-form constants of the small-deviation asymptotics.

For weights ``d_k ~ d_(+/-) |k|^{-p}`` and a moving average with symbol
``a(x) = sum_m a_m exp(i m x)`` the Karhunen-Loeve eigenvalues satisfy
``lambda_n ~ C n^{-2p}`` with

    Delta = mean_x |a(x)|^{1/p} * (d_-^{1/p} + d_+^{1/p}),    C = Delta^{2p},

and ``ln P(||Z||^2 <= eps^2) ~ -B_p (C / eps^2)^{1/(2p-1)}``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from ._validation import check_scalar
from .exceptions import DomainError, NumericError
from .model import CoefficientWindow, MASpec, WeightSequence, density_amplitude

__all__ = [
    "TheoryConstants", "QuadratureResult", "constant_Bp", "amplitude_power_mean",
    "delta_mu", "constant_C", "theory_constants", "predicted_eigenvalue",
    "predicted_log_smalldev", "DEFAULT_REL_TOL",
]

DEFAULT_REL_TOL = 1e-10
MAX_GRID = 2 ** 24
MIN_GRID = 16


def constant_Bp(p: float) -> float:
    """``B_p = (2p-1)/2 * (pi / (2p sin(pi/(2p))))^{2p/(2p-1)}``."""
    p = check_scalar(p, "p", lower=0.5, include_lower=False)
    base = math.pi / (2.0 * p * math.sin(math.pi / (2.0 * p)))
    return 0.5 * (2.0 * p - 1.0) * base ** (2.0 * p / (2.0 * p - 1.0))


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    grid_size: int
    rel_err: float


def amplitude_power_mean(window: CoefficientWindow, power: float,
                         rel_tol: float = DEFAULT_REL_TOL, max_grid: int = MAX_GRID):
    """``(1/2pi) int_0^{2pi} |a(x)|^power dx`` by the periodic trapezoid rule.

    The grid is doubled until two successive values agree to ``rel_tol``.
    Convergence is spectral for analytic symbols and algebraic when ``a``
    has zeros (the integrand stays continuous for ``power > 0``).
    """
    rel_tol = check_scalar(rel_tol, "rel_tol", lower=0.0, include_lower=False)
    G = max(MIN_GRID, 1 << (2 * len(window) - 1).bit_length())
    prev = float(np.mean(density_amplitude(window, G).amplitudes ** power))
    err = float("nan")
    while True:
        G *= 2
        if G > max_grid:
            raise NumericError(
                f"quadrature did not reach rel_tol={rel_tol:g} within grid {max_grid}",
                achieved=err, grid_size=G // 2)
        cur = float(np.mean(density_amplitude(window, G).amplitudes ** power))
        err = abs(cur - prev) / abs(cur) if cur != 0.0 else abs(cur - prev)
        if err <= rel_tol:
            return QuadratureResult(cur, G, err)
        prev = cur


def _side_factor(w: WeightSequence):
    q = 1.0 / w.p
    return w.d_minus ** q + w.d_plus ** q


def delta_mu(window: CoefficientWindow, w: WeightSequence,
             rel_tol: float = DEFAULT_REL_TOL) -> float:
    """Limit of ``s^{1/p} N(s)`` for the singular-value counting function."""
    quad = amplitude_power_mean(window, 1.0 / w.p, rel_tol)
    return quad.value * _side_factor(w)


def _lr_warning(spec, w):
    # heavier-than-l_r tails are only a concern for p < 1
    return w.p < 1.0 and spec is not None and not getattr(spec, "lr_certified", False)


def constant_C(window: CoefficientWindow, w: WeightSequence,
               rel_tol: float = DEFAULT_REL_TOL, spec: MASpec | None = None):
    """Eigenvalue decay constant ``C``.

    Prefix overrides in ``w`` are ignored: finitely many weights do not
    change the asymptotics.

    Returns
    -------
    C : float
    meta : dict
        ``grid_size``, achieved ``rel_err``, ``Delta_mu`` and the
        ``lr_warning`` flag.
    """
    quad = amplitude_power_mean(window, 1.0 / w.p, rel_tol)
    delta = quad.value * _side_factor(w)
    C = delta ** (2.0 * w.p)
    flag = _lr_warning(spec, w)
    if flag:
        warnings.warn("p < 1 and the model family is not certified to lie in l_r for r < 2",
                      RuntimeWarning, stacklevel=2)
    meta = {"grid_size": quad.grid_size, "rel_err": quad.rel_err, "Delta_mu": delta,
            "lr_warning": flag}
    return C, meta


@dataclass(frozen=True)
class TheoryConstants:
    p: float
    B_p: float
    C: float
    Delta_mu: float
    sd_exponent: float
    quadrature_grid: int
    quadrature_rel_err: float
    lr_warning: bool = False

    def to_dict(self):
        return asdict(self)


def theory_constants(window: CoefficientWindow, w: WeightSequence,
                     rel_tol: float = DEFAULT_REL_TOL, spec: MASpec | None = None
                     ) -> TheoryConstants:
    C, meta = constant_C(window, w, rel_tol, spec=spec)
    return TheoryConstants(
        p=w.p, B_p=constant_Bp(w.p), C=C, Delta_mu=meta["Delta_mu"],
        sd_exponent=2.0 / (2.0 * w.p - 1.0), quadrature_grid=meta["grid_size"],
        quadrature_rel_err=meta["rel_err"], lr_warning=meta["lr_warning"])


def predicted_eigenvalue(n, C, p):
    """``C n^{-2p}``; accepts scalar or array ``n``."""
    n_arr = np.asarray(n, dtype=float)
    if np.any(n_arr < 1):
        raise DomainError("eigenvalue index must be >= 1")
    out = C * n_arr ** (-2.0 * p)
    return float(out) if out.ndim == 0 else out


def predicted_log_smalldev(p: float, C: float, eps: float) -> float:
    """``-B_p (C / eps^2)^{1/(2p-1)}``."""
    check_scalar(eps, "eps", lower=0.0, include_lower=False)
    check_scalar(C, "C", lower=0.0, include_lower=False)
    return -constant_Bp(p) * (C / (eps * eps)) ** (1.0 / (2.0 * p - 1.0))
