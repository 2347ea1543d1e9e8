"""Probabilities ``P(Q <= eps^2)`` for Gaussian quadratic forms.

``Q = sum_n lambda_n xi_n^2`` with i.i.d. standard normal ``xi_n``.  Four
routes are provided: closed forms for one or two equal eigenvalues, the
saddlepoint (Legendre dual of the log-Laplace transform), importance
sampling under the exponentially tilted law, and direct simulation of the
weighted moving-average sequence itself.

Monte Carlo draws come from counter-based Philox streams keyed by
``(seed, block index)``; blocks have a fixed size, so estimates do not
depend on how many worker threads process them.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.signal
from scipy import special
from scipy.optimize import brentq

from ._validation import as_eigenvalues, check_int, check_scalar
from .exceptions import DomainError, EstimateFailure, RegimeError, UnsupportedError
from .model import MASpec, WeightSequence, materialize, weights

__all__ = [
    "SmallDevEstimate", "log_laplace", "solve_saddle", "saddlepoint_log_prob",
    "tilted_mc_log_prob", "exact_small_case_log_prob", "direct_sim_log_prob",
    "default_workers", "eps_for_log_prob", "THREADS_ENV",
]

THREADS_ENV = "SMALLDEV_NUM_THREADS"
MIN_SAMPLES = 1000
SADDLE_REL_TOL = 1e-12

# stream tags keep tilted and direct draws apart for the same seed
_TAG_TILTED = 1
_TAG_DIRECT = 2


@dataclass(frozen=True)
class SmallDevEstimate:
    eps: float
    log_prob: float
    method: str
    std_err: float | None = None
    saddle_t: float | None = None
    samples: int | None = None
    seed: int | None = None
    order: str | None = None

    def to_dict(self):
        return {"eps": self.eps, "log_prob": self.log_prob, "method": self.method,
                "std_err": self.std_err, "saddle_t": self.saddle_t,
                "samples": self.samples, "seed": self.seed, "order": self.order}


def log_laplace(lambdas, t: float) -> float:
    """``ln E exp(-t Q) = -1/2 sum ln(1 + 2 t lambda_n)``."""
    lam = as_eigenvalues(lambdas)
    t = check_scalar(t, "t", lower=0.0)
    return -0.5 * float(np.sum(np.log1p(2.0 * t * lam)))


def _mean_under_tilt(lam, t):
    return float(np.sum(lam / (1.0 + 2.0 * t * lam)))


def _tilted_variance(lam, t):
    return float(np.sum(2.0 * lam ** 2 / (1.0 + 2.0 * t * lam) ** 2))


def _check_eps(eps):
    if not isinstance(eps, (int, float, np.floating, np.integer)) or not eps > 0:
        raise DomainError(f"eps must be positive, got {eps!r}")
    return float(eps)


def solve_saddle(lambdas, eps: float) -> float:
    """Root ``t* > 0`` of ``sum lambda_n / (1 + 2 t lambda_n) = eps^2``.

    Bisection on ``ln t``; the left side is strictly decreasing in ``t``.
    """
    lam = as_eigenvalues(lambdas)
    lam = lam[lam > 0]
    eps = _check_eps(eps)
    x = eps * eps
    total = float(np.sum(lam))
    if lam.size == 0 or x >= total:
        raise RegimeError(
            f"eps^2={x:g} is not below sum(lambda)={total:g}; not a small deviation")
    t_hi = lam.size / (2.0 * x)
    t_lo = 0.25 * (total / x - 1.0) / lam.max()
    u_lo, u_hi = math.log(t_lo), math.log(t_hi)
    for _ in range(400):
        u_mid = 0.5 * (u_lo + u_hi)
        if u_mid <= u_lo or u_mid >= u_hi:
            break
        if _mean_under_tilt(lam, math.exp(u_mid)) > x:
            u_lo = u_mid
        else:
            u_hi = u_mid
        if u_hi - u_lo <= 1e-3 * SADDLE_REL_TOL:
            break
    cands = (math.exp(u_lo), math.exp(u_hi), math.exp(0.5 * (u_lo + u_hi)))
    return min(cands, key=lambda t: abs(_mean_under_tilt(lam, t) - x))


def saddlepoint_log_prob(lambdas, eps: float, order: str = "corrected") -> SmallDevEstimate:
    """Saddlepoint estimate of ``ln P(Q <= eps^2)``.

    ``order="leading"`` returns the Legendre dual ``t* eps^2 + L(t*)``.
    ``order="corrected"`` subtracts ``1/2 ln(2 pi t*^2 V(t*))`` where ``V``
    is the variance of ``Q`` under the tilted law, i.e. the Laplace
    expansion ``P ~ exp(t* eps^2 + L(t*)) / (t* sqrt(2 pi V))``.
    """
    if order not in ("leading", "corrected"):
        raise DomainError(f"order must be 'leading' or 'corrected', got {order!r}")
    lam = as_eigenvalues(lambdas)
    eps = _check_eps(eps)
    t = solve_saddle(lam, eps)
    lam = lam[lam > 0]
    val = t * eps * eps + log_laplace(lam, t)
    if order == "corrected":
        val -= 0.5 * math.log(2.0 * math.pi * t * t * _tilted_variance(lam, t))
    return SmallDevEstimate(eps, min(val, 0.0), "saddlepoint", saddle_t=t, order=order)


def exact_small_case_log_prob(lambdas, eps: float) -> SmallDevEstimate:
    """Closed forms for spectra ``[lam]`` and ``[lam, lam]``."""
    lam = as_eigenvalues(lambdas)
    eps = _check_eps(eps)
    if lam.size == 1 and lam[0] > 0:
        val = math.log(special.erf(eps / math.sqrt(2.0 * lam[0])))
    elif lam.size == 2 and lam[0] > 0 and math.isclose(lam[0], lam[1], rel_tol=1e-12):
        val = math.log(-math.expm1(-eps * eps / (2.0 * lam[0])))
    else:
        raise UnsupportedError("closed form only for spectra [lam] or [lam, lam]")
    return SmallDevEstimate(eps, val, "exact")


def default_workers():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _block_rows(dim):
    return int(min(8192, max(64, (1 << 21) // max(dim, 1))))


def _normals(seed, tag, block, rows, dim):
    key = np.array([seed, (tag << 48) | block], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key)).standard_normal((rows, dim))


def _run_blocks(fn, n_samples, dim, workers):
    B = _block_rows(dim)
    blocks = [(b, min(B, n_samples - b * B)) for b in range((n_samples + B - 1) // B)]
    workers = default_workers() if workers is None else check_int(workers, "workers", lower=1)
    if workers == 1:
        parts = [fn(b, r) for b, r in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(lambda br: fn(*br), blocks))
    # exact rounding => independent of summation order
    return tuple(math.fsum(col) for col in zip(*parts))


def _check_mc_args(n_samples, seed):
    n_samples = check_int(n_samples, "n_samples", lower=MIN_SAMPLES)
    seed = check_int(seed, "seed", lower=0)
    if seed >= 2 ** 64:
        raise DomainError("seed must fit in 64 bits")
    return n_samples, seed


def tilted_mc_log_prob(lambdas, eps: float, n_samples: int = 100_000, seed: int = 0,
                       workers: int | None = None) -> SmallDevEstimate:
    """Importance-sampling estimate of ``ln P(Q <= eps^2)``.

    Coordinates are drawn with variance ``1/(1 + 2 t* lambda_n)`` and each
    draw is weighted by ``exp(t* (Q - eps^2)) 1{Q <= eps^2}``, so

        P = exp(L(t*) + t* eps^2) * E_tilt[weight].

    When ``eps^2 >= sum(lambda)`` there is no positive saddle and the
    estimator falls back to plain sampling (``t = 0``).
    """
    lam = as_eigenvalues(lambdas)
    eps = _check_eps(eps)
    n_samples, seed = _check_mc_args(n_samples, seed)
    lam = lam[lam > 0]
    x = eps * eps
    if lam.size == 0:
        return SmallDevEstimate(eps, 0.0, "tilted_mc", std_err=0.0, samples=n_samples, seed=seed)
    t = solve_saddle(lam, eps) if x < float(np.sum(lam)) else 0.0
    sigma = 1.0 / np.sqrt(1.0 + 2.0 * t * lam)

    def block(b, rows):
        z = _normals(seed, _TAG_TILTED, b, rows, lam.size) * sigma
        q = (z * z) @ lam
        wgt = np.where(q <= x, np.exp(t * (np.minimum(q, x) - x)), 0.0)
        return float(np.sum(wgt)), float(np.sum(wgt * wgt)), int(np.count_nonzero(wgt))

    s1, s2, hits = _run_blocks(block, n_samples, lam.size, workers)
    if hits == 0:
        raise EstimateFailure(
            f"no accepted samples at eps={eps:g}; increase n_samples (now {n_samples})")
    mean = s1 / n_samples
    var = max(s2 / n_samples - mean * mean, 0.0)
    log_p = log_laplace(lam, t) + t * x + math.log(mean)
    se = math.sqrt(var / n_samples) / mean
    return SmallDevEstimate(eps, min(log_p, 0.0), "tilted_mc", std_err=se,
                            saddle_t=t if t > 0 else None, samples=n_samples, seed=seed)


def direct_sim_log_prob(spec: MASpec, w: WeightSequence, N: int, eps: float,
                        n_samples: int = 100_000, seed: int = 0, tol: float = 1e-14,
                        workers: int | None = None) -> SmallDevEstimate:
    """Empirical ``ln P(sum_{|k|<=N} d_k^2 U_k^2 <= eps^2)``.

    Innovations ``X_j``, ``|j| <= N + L``, are simulated and filtered with
    the materialized window; ``L`` is the window half-width, the same
    padding used by :func:`smalldev.operator.build`.
    """
    eps = _check_eps(eps)
    N = check_int(N, "N", lower=1)
    n_samples, seed = _check_mc_args(n_samples, seed)
    window = materialize(spec, tol)
    L = window.half_width
    J = 2 * (N + L) + 1
    ell = len(window)
    c = window.coeffs
    d2 = weights(w, np.arange(-N, N + 1)) ** 2
    x = eps * eps
    t0 = L - window.offset - ell + 1  # first 'valid' convolution output feeding k = -N

    def block(b, rows):
        X = _normals(seed, _TAG_DIRECT, b, rows, J)
        if ell <= 64:
            U = np.zeros((rows, 2 * N + 1))
            for i, a in enumerate(c):
                start = N + L - (window.offset + i) - N
                U += a * X[:, start:start + 2 * N + 1]
        else:
            U = scipy.signal.fftconvolve(X, c[None, :], mode="valid", axes=1)[:, t0:t0 + 2 * N + 1]
        q = (U * U) @ d2
        return (int(np.count_nonzero(q <= x)),)

    (hits,) = _run_blocks(block, n_samples, J, workers)
    hits = int(hits)
    if hits == 0:
        raise EstimateFailure(
            f"no samples with Q_N <= eps^2 at eps={eps:g}; use tilted_mc on the spectrum instead")
    p_hat = hits / n_samples
    se = math.sqrt((1.0 - p_hat) / (n_samples * p_hat))
    return SmallDevEstimate(eps, math.log(p_hat), "direct_sim", std_err=se,
                            samples=n_samples, seed=seed)


def eps_for_log_prob(lambdas, target: float, order: str = "corrected") -> float:
    """Level ``eps`` whose saddlepoint ``ln P(Q <= eps^2)`` equals ``target``."""
    lam = as_eigenvalues(lambdas)
    target = check_scalar(target, "target", upper=0.0, include_upper=False)
    e_hi = math.sqrt(float(np.sum(lam))) * (1.0 - 1e-9)

    def f(e):
        return saddlepoint_log_prob(lam, e, order).log_prob - target

    e_lo = e_hi
    while f(e_lo) > 0:
        e_lo *= 0.5
    if e_lo == e_hi:
        raise RegimeError(f"target {target} not reachable below the regime boundary")
    return float(brentq(f, e_lo, e_hi, xtol=1e-14, rtol=1e-12))
