"""Truncated covariance operator ``M = D A`` and its spectrum.

Rows are indexed by ``k in [-N, N]`` and columns by ``j in [-(N+L), N+L]``;
``M[k, j] = d_k a_{k-j}``.  The Karhunen-Loeve eigenvalues of the truncated
vector ``(d_k U_k)_{|k|<=N}`` are the eigenvalues of ``M M^T``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ._io import write_csv
from ._validation import check_int, check_scalar
from .exceptions import DomainError, NumericError, ResourceError
from .model import CoefficientWindow, WeightSequence, autocovariances, weights

__all__ = [
    "TruncatedOperator", "Spectrum", "DecayFit", "build", "spectrum",
    "counting_function", "fit_decay_constant", "default_fit_range",
    "write_spectrum_csv", "write_counting_csv", "tail_completed_eigenvalues", "tail_index_for",
]

DEFAULT_MEMORY_BUDGET = 2 * 1024 ** 3
CLAMP_RELATIVE = 1e-14


@dataclass(frozen=True)
class TruncatedOperator:
    N: int
    L: int
    entries: np.ndarray
    d: np.ndarray
    window: CoefficientWindow
    weights: WeightSequence

    @property
    def row_indices(self):
        return np.arange(-self.N, self.N + 1)

    @property
    def col_indices(self):
        return np.arange(-(self.N + self.L), self.N + self.L + 1)

    def gram(self):
        """``M M^T`` assembled as ``D R D``.

        ``R[k, k'] = r(k - k')`` is the Toeplitz autocovariance matrix of
        ``U``; it equals ``A A^T`` restricted to the rows because the column
        padding covers the whole window.  Assembling it this way makes the
        result independent of the window offset bit for bit.
        """
        n = 2 * self.N + 1
        r = autocovariances(self.window, n - 1)
        R = scipy.linalg.toeplitz(r)
        return self.d[:, None] * R * self.d[None, :]


def build(window: CoefficientWindow, w: WeightSequence, N: int, L=None,
          memory_budget=DEFAULT_MEMORY_BUDGET) -> TruncatedOperator:
    """Assemble the dense truncated operator.

    ``L`` defaults to the window half-width, the smallest padding for which
    no nonzero entry is clipped; a larger value may be passed so that
    several shifted windows share one column range.
    """
    N = check_int(N, "N", lower=1)
    hw = window.half_width
    L = hw if L is None else check_int(L, "L", lower=0)
    if L < hw:
        raise DomainError(f"column padding L={L} clips the window (half-width {hw})")
    rows, cols = 2 * N + 1, 2 * (N + L) + 1
    # M itself plus the Gram matrix and eigensolver workspace
    need = 8 * (rows * cols + 3 * rows * rows)
    if need > memory_budget:
        raise ResourceError(
            f"N={N} needs about {need / 2**20:.0f} MiB, budget is {memory_budget / 2**20:.0f} MiB")
    k = np.arange(-N, N + 1)
    d = weights(w, k)
    d.setflags(write=False)
    M = np.zeros((rows, cols))
    # lag m = k - j  =>  column position (k - m) + N + L
    for i, a in enumerate(window.coeffs):
        m = window.offset + i
        M[np.arange(rows), k - m + N + L] = d * a
    M.setflags(write=False)
    return TruncatedOperator(N, L, M, d, window, w)


@dataclass(frozen=True)
class Spectrum:
    """Nonincreasing eigenvalues ``lambda_1 >= lambda_2 >= ... >= 0``."""

    eigenvalues: np.ndarray
    N: int
    L: int
    tail_mass: float = 0.0
    frobenius_sq: float = field(default=float("nan"), compare=False)

    def __len__(self):
        return self.eigenvalues.size

    @property
    def singular_values(self):
        return np.sqrt(self.eigenvalues)

    def scaled_eigenvalues(self, p):
        """``lambda_n n^{2p}`` for ``n = 1..len``."""
        n = np.arange(1, len(self) + 1, dtype=float)
        return self.eigenvalues * n ** (2.0 * p)


def _sorted_clamped(vals):
    lam = np.sort(np.asarray(vals, dtype=float))[::-1].copy()
    if lam.size and lam[0] > 0:
        lam[lam < CLAMP_RELATIVE * lam[0]] = 0.0
    else:
        lam[:] = 0.0
    lam.setflags(write=False)
    return lam


def spectrum(op: TruncatedOperator) -> Spectrum:
    """Eigenvalues of ``M M^T`` via a dense symmetric eigensolver."""
    G = op.gram()
    try:
        vals = scipy.linalg.eigvalsh(G, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as err:
        raise NumericError(f"eigensolver failed: {err}", N=op.N, size=G.shape[0]) from err
    fro = float(np.einsum("ij,ij->", op.entries, op.entries))
    return Spectrum(_sorted_clamped(vals), op.N, op.L, op.window.tail_mass, fro)


def counting_function(spec: Spectrum, s: float) -> int:
    """Number of singular values ``sqrt(lambda_n) >= s``."""
    s = check_scalar(s, "s", lower=0.0, include_lower=False)
    return int(np.count_nonzero(spec.singular_values >= s))


@dataclass(frozen=True)
class DecayFit:
    """Estimate of ``C`` in ``lambda_n ~ C n^{-2p}``.

    ``C_hat`` is the median of ``lambda_n n^{2p}`` over the fit window and
    ``dispersion`` its interquartile range.
    """

    C_hat: float
    dispersion: float
    n_lo: int
    n_hi: int
    parity: str
    edge_warning: bool

    def to_dict(self):
        return {"C_hat": self.C_hat, "dispersion": self.dispersion, "n_lo": self.n_lo,
                "n_hi": self.n_hi, "parity": self.parity, "edge_warning": self.edge_warning}


def default_fit_range(N):
    return max(1, N // 10), max(2, (2 * N) // 5)


def fit_decay_constant(spec: Spectrum, p: float, fit_range=None, parity="all") -> DecayFit:
    """Fit the decay constant from the mid-range of the spectrum.

    Parameters
    ----------
    spec : Spectrum
    p : float
        Decay exponent of the weights.
    fit_range : (int, int), optional
        Inclusive index window ``[n_lo, n_hi]`` (1-based).  Defaults to
        ``[N/10, 2N/5]``.
    parity : {"all", "even", "odd"}
        Restrict to indices of one parity; with equal one-sided constants the
        two branches interleave and ``"even"`` removes the oscillation.
    """
    p = check_scalar(p, "p", lower=0.5, include_lower=False)
    n_lo, n_hi = default_fit_range(spec.N) if fit_range is None else map(int, fit_range)
    if not 1 <= n_lo < n_hi <= len(spec):
        raise DomainError(f"fit range [{n_lo}, {n_hi}] invalid for spectrum of length {len(spec)}")
    if parity not in ("all", "even", "odd"):
        raise DomainError(f"parity must be 'all', 'even' or 'odd', got {parity!r}")
    n = np.arange(n_lo, n_hi + 1)
    if parity == "even":
        n = n[n % 2 == 0]
    elif parity == "odd":
        n = n[n % 2 == 1]
    vals = spec.eigenvalues[n - 1] * n.astype(float) ** (2.0 * p)
    q1, med, q3 = np.percentile(vals, [25, 50, 75])
    edge = n_hi > len(spec) // 2
    return DecayFit(float(med), float(q3 - q1), n_lo, n_hi, parity, bool(edge))


def write_spectrum_csv(spec: Spectrum, p: float, path) -> None:
    scaled = spec.scaled_eigenvalues(p)
    rows = ((n, repr(float(lam)), repr(float(sc)))
            for n, (lam, sc) in enumerate(zip(spec.eigenvalues, scaled), start=1))
    write_csv(path, ["n", "lambda_n", "lambda_n_n2p"], rows)


def write_counting_csv(spec: Spectrum, path, n_points=200) -> None:
    sv = spec.singular_values[spec.singular_values > 0]
    s_grid = np.geomspace(sv[-1], sv[0], n_points)
    rows = ((repr(float(s)), counting_function(spec, s)) for s in s_grid)
    write_csv(path, ["s", "N_s"], rows)


def tail_completed_eigenvalues(spec: Spectrum, fit: DecayFit, p: float, n_max: int) -> np.ndarray:
    """Computed head ``lambda_1..lambda_{n_hi}`` followed by ``C_hat n^{-2p}``.

    The truncated spectrum has only ``2N+1`` entries and its far end is
    biased by the truncation; for levels whose relevant eigen-index exceeds
    that range the fitted power law stands in for the missing tail.
    """
    n_max = check_int(n_max, "n_max", lower=fit.n_hi)
    head = spec.eigenvalues[:fit.n_hi]
    n = np.arange(fit.n_hi + 1, n_max + 1, dtype=float)
    return np.concatenate([head, fit.C_hat * n ** (-2.0 * p)])


def tail_index_for(C_hat, p, eps, rel=1e-3, cap=2 ** 23):
    """Index beyond which the fitted tail mass is below ``rel * eps^2``."""
    n = (C_hat / ((2.0 * p - 1.0) * rel * eps * eps)) ** (1.0 / (2.0 * p - 1.0))
    return int(min(cap, max(1, math.ceil(n))))
