"""Stationary moving-average models, weight sequences and symbol evaluation.

A stationary Gaussian sequence is represented through its moving-average
coefficients, ``U_k = sum_m a_m X_{k-m}`` with i.i.d. standard normal
innovations ``X_j``.  Each family below expands to a two-sided square
summable sequence ``(a_m)``; :func:`materialize` cuts it to a finite
:class:`CoefficientWindow` whose discarded l2 mass is bounded by a tolerance.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import ClassVar, Mapping

import numpy as np

from ._validation import check_int, check_scalar, is_power_of_two
from .exceptions import DomainError, ModelError

__all__ = [
    "IID", "AR1", "FiniteMA", "TwoSidedGeometric", "Explicit", "MASpec",
    "CoefficientWindow", "WeightSequence", "DensityGrid",
    "materialize", "density_amplitude", "autocovariance", "autocovariances",
    "weight_at", "weights", "spec_to_mapping", "spec_from_mapping",
    "weights_to_mapping", "weights_from_mapping",
    "write_window_csv", "read_window_csv",
]

# hard cap on materialized window length, guards against rho -> 1 with tiny tol
MAX_WINDOW = 10_000_000


class MASpec:
    """Base class of the moving-average families."""

    kind: ClassVar[str] = ""
    # finitely supported or geometrically decaying => in l_r for every r > 0
    lr_certified: ClassVar[bool] = True


@dataclass(frozen=True)
class IID(MASpec):
    """Independent sequence, ``a_0 = a0`` and all other coefficients zero."""

    a0: float = 1.0
    kind: ClassVar[str] = "iid"

    def __post_init__(self):
        object.__setattr__(self, "a0", check_scalar(self.a0, "a0", exc=ModelError))


@dataclass(frozen=True)
class AR1(MASpec):
    """Causal AR(1): ``a_m = scale * rho**m`` for ``m >= 0``."""

    rho: float
    scale: float = 1.0
    kind: ClassVar[str] = "ar1"

    def __post_init__(self):
        rho = check_scalar(self.rho, "rho", lower=-1.0, upper=1.0, include_lower=False,
                           include_upper=False, exc=ModelError)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "scale", check_scalar(self.scale, "scale", exc=ModelError))


@dataclass(frozen=True)
class TwoSidedGeometric(MASpec):
    """Symmetric filter ``a_m = scale * rho**|m|`` for all integers ``m``."""

    rho: float
    scale: float = 1.0
    kind: ClassVar[str] = "two_sided_geometric"

    def __post_init__(self):
        rho = check_scalar(self.rho, "rho", lower=0.0, upper=1.0, include_lower=False,
                           include_upper=False, exc=ModelError)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "scale", check_scalar(self.scale, "scale", exc=ModelError))


def _coeff_tuple(coeffs):
    try:
        arr = np.asarray(coeffs, dtype=float).ravel()
    except (TypeError, ValueError) as err:
        raise ModelError(f"coefficients must be real numbers: {err}") from None
    if arr.size == 0:
        raise ModelError("coefficient list is empty")
    if not np.all(np.isfinite(arr)):
        raise ModelError("coefficients must be finite")
    return tuple(float(c) for c in arr)


@dataclass(frozen=True)
class FiniteMA(MASpec):
    """Finite moving average, ``a_{offset+i} = coeffs[i]``."""

    coeffs: tuple
    offset: int = 0
    kind: ClassVar[str] = "finite_ma"

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _coeff_tuple(self.coeffs))
        object.__setattr__(self, "offset", check_int(self.offset, "offset", exc=ModelError))


@dataclass(frozen=True)
class Explicit(FiniteMA):
    """Explicit coefficient list; identical expansion to :class:`FiniteMA`."""

    kind: ClassVar[str] = "explicit"


_FAMILIES = {cls.kind: cls for cls in (IID, AR1, FiniteMA, TwoSidedGeometric, Explicit)}


@dataclass(frozen=True)
class CoefficientWindow:
    """Finite stretch of ``(a_m)``: ``coeffs[i] = a_{offset+i}``.

    ``tail_mass`` bounds the sum of squares of every coefficient outside
    the window (zero for finitely supported families).
    """

    coeffs: np.ndarray
    offset: int = 0
    tail_mass: float = 0.0

    def __post_init__(self):
        arr = np.array(self.coeffs, dtype=float).ravel()
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)
        object.__setattr__(self, "offset", int(self.offset))
        object.__setattr__(self, "tail_mass", float(self.tail_mass))

    def __len__(self):
        return self.coeffs.size

    @property
    def indices(self):
        return np.arange(self.offset, self.offset + len(self))

    @property
    def half_width(self):
        """Smallest ``L`` with every window index inside ``[-L, L]``."""
        return max(abs(self.offset), abs(self.offset + len(self) - 1))

    def at(self, m):
        i = m - self.offset
        if 0 <= i < len(self):
            return float(self.coeffs[i])
        return 0.0

    def scaled(self, c):
        return CoefficientWindow(c * self.coeffs, self.offset, c * c * self.tail_mass)

    def shifted(self, h):
        return CoefficientWindow(self.coeffs, self.offset + h, self.tail_mass)

    def reversed(self):
        """Window of ``a_{-m}``."""
        return CoefficientWindow(self.coeffs[::-1], -(self.offset + len(self) - 1), self.tail_mass)


def _geometric_cut(rho, scale, tol, sides):
    # smallest L with sides * scale^2 rho^(2(L+1)) / (1 - rho^2) <= tol
    r2 = rho * rho
    s2 = scale * scale
    if r2 == 0.0:
        return 0, 0.0

    def tail(L):
        return sides * s2 * r2 ** (L + 1) / (1.0 - r2)

    guess = math.log(tol * (1.0 - r2) / (sides * s2)) / math.log(r2) - 1.0
    L = max(0, int(math.ceil(guess)))
    while L > 0 and tail(L - 1) <= tol:
        L -= 1
    while tail(L) > tol:
        L += 1
    if L + 1 > MAX_WINDOW:
        raise ModelError(f"window of length {L + 1} exceeds MAX_WINDOW; raise tol")
    return L, tail(L)


def materialize(spec: MASpec, tol: float = 1e-14) -> CoefficientWindow:
    """Cut a moving-average spec to a finite window.

    Parameters
    ----------
    spec : MASpec
        Model family instance.
    tol : float
        Upper bound for the l2 mass of the discarded coefficients.

    Returns
    -------
    CoefficientWindow
        Window with ``tail_mass <= tol``; exact (``tail_mass == 0``) for
        finitely supported families.
    """
    tol = check_scalar(tol, "tol", lower=0.0, include_lower=False)
    if isinstance(spec, IID):
        win = CoefficientWindow([spec.a0], 0, 0.0)
    elif isinstance(spec, AR1):
        if spec.scale == 0.0:
            raise ModelError("AR1 with scale 0 is identically zero")
        L, tail = _geometric_cut(spec.rho, spec.scale, tol, sides=1)
        win = CoefficientWindow(spec.scale * spec.rho ** np.arange(L + 1), 0, tail)
    elif isinstance(spec, TwoSidedGeometric):
        if spec.scale == 0.0:
            raise ModelError("TwoSidedGeometric with scale 0 is identically zero")
        L, tail = _geometric_cut(spec.rho, spec.scale, tol, sides=2)
        m = np.arange(-L, L + 1)
        win = CoefficientWindow(spec.scale * spec.rho ** np.abs(m), -L, tail)
    elif isinstance(spec, FiniteMA):
        win = CoefficientWindow(spec.coeffs, spec.offset, 0.0)
    else:
        raise ModelError(f"unknown model spec {spec!r}")
    if not np.any(win.coeffs):
        raise ModelError("model is identically zero")
    return win


@dataclass(frozen=True)
class DensityGrid:
    """Values of ``|a(x)|`` at the nodes ``x_j = 2*pi*j/grid_size``."""

    grid_size: int
    amplitudes: np.ndarray

    @property
    def nodes(self):
        return 2.0 * np.pi * np.arange(self.grid_size) / self.grid_size


def density_amplitude(window: CoefficientWindow, grid_size: int) -> DensityGrid:
    """Evaluate ``|sum_m a_m exp(i m x)|`` on a dyadic grid.

    The offset only contributes a unimodular phase, so the result depends on
    ``window.coeffs`` alone.
    """
    grid_size = check_int(grid_size, "grid_size", lower=1)
    if not is_power_of_two(grid_size):
        raise DomainError(f"grid_size must be a power of two, got {grid_size}")
    if grid_size < 2 * len(window):
        raise DomainError(
            f"grid_size {grid_size} too small for window of length {len(window)}; "
            f"need at least {2 * len(window)}")
    # real coefficients: |conj| == | . |, so the forward transform suffices
    amp = np.abs(np.fft.fft(window.coeffs, n=grid_size))
    amp.setflags(write=False)
    return DensityGrid(grid_size, amp)


def autocovariance(window: CoefficientWindow, lag: int) -> float:
    """``cov(U_0, U_lag) = sum_m a_m a_{m+lag}``."""
    h = abs(int(lag))
    c = window.coeffs
    if h >= c.size:
        return 0.0
    return float(np.dot(c[: c.size - h], c[h:]))


def autocovariances(window: CoefficientWindow, max_lag: int) -> np.ndarray:
    """Autocovariances at lags ``0..max_lag`` (zero beyond the window)."""
    c = window.coeffs
    full = np.correlate(c, c, mode="full")[c.size - 1:]
    out = np.zeros(max_lag + 1)
    k = min(full.size, max_lag + 1)
    out[:k] = full[:k]
    return out


@dataclass(frozen=True)
class WeightSequence:
    """Weights ``d_k = d(sgn k) |k|^{-p}`` with ``d_0 = 0``.

    Finitely many entries may be replaced through ``prefix_override``;
    such changes do not affect any asymptotic constant.
    """

    p: float
    d_plus: float = 1.0
    d_minus: float = 1.0
    prefix_override: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        p = check_scalar(self.p, "p", lower=0.5, include_lower=False, exc=DomainError)
        dp = check_scalar(self.d_plus, "d_plus", lower=0.0, exc=ModelError)
        dm = check_scalar(self.d_minus, "d_minus", lower=0.0, exc=ModelError)
        if max(dp, dm) <= 0.0:
            raise ModelError("at least one of d_plus, d_minus must be positive")
        over = {}
        for k, v in dict(self.prefix_override or {}).items():
            over[check_int(k, "override index", exc=ModelError)] = check_scalar(
                v, f"override d_{k}", lower=0.0, exc=ModelError)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "d_plus", dp)
        object.__setattr__(self, "d_minus", dm)
        object.__setattr__(self, "prefix_override", dict(sorted(over.items())))

    def __hash__(self):
        return hash((self.p, self.d_plus, self.d_minus, tuple(self.prefix_override.items())))

    @property
    def is_homogeneous(self):
        return not self.prefix_override

    def homogeneous(self):
        return WeightSequence(self.p, self.d_plus, self.d_minus)


def weights(w: WeightSequence, ks) -> np.ndarray:
    """Vectorized :func:`weight_at`."""
    ks = np.asarray(ks, dtype=np.int64)
    absk = np.abs(ks).astype(float)
    with np.errstate(divide="ignore"):
        base = np.where(ks == 0, 0.0, absk ** -w.p)
    d = np.where(ks > 0, w.d_plus, np.where(ks < 0, w.d_minus, 0.0))
    out = d * base
    if w.prefix_override:
        for k, v in w.prefix_override.items():
            out[ks == k] = v
    return out


def weight_at(w: WeightSequence, k: int) -> float:
    k = int(k)
    if k in w.prefix_override:
        return float(w.prefix_override[k])
    if k == 0:
        return 0.0
    d = w.d_plus if k > 0 else w.d_minus
    return d * float(abs(k)) ** -w.p


# --- plain-text serialization -------------------------------------------------

def _fmt(x):
    return repr(float(x))


def spec_to_mapping(spec: MASpec) -> dict:
    """Flat ``key -> str`` mapping suitable for a ``[model]`` config section."""
    out = {"kind": spec.kind}
    if isinstance(spec, IID):
        out["a0"] = _fmt(spec.a0)
    elif isinstance(spec, (AR1, TwoSidedGeometric)):
        out["rho"] = _fmt(spec.rho)
        out["scale"] = _fmt(spec.scale)
    else:
        out["coeffs"] = ", ".join(_fmt(c) for c in spec.coeffs)
        out["offset"] = str(spec.offset)
    return out


def _get_float(m, key, default=None):
    if key not in m:
        if default is None:
            raise ModelError(f"missing model key {key!r}")
        return default
    try:
        return float(m[key])
    except ValueError:
        raise ModelError(f"model key {key!r} is not a number: {m[key]!r}") from None


def spec_from_mapping(m: Mapping[str, str]) -> MASpec:
    kind = str(m.get("kind", "")).strip().lower()
    if kind not in _FAMILIES:
        raise ModelError(f"unknown model kind {kind!r}; expected one of {sorted(_FAMILIES)}")
    cls = _FAMILIES[kind]
    if cls is IID:
        return IID(_get_float(m, "a0", 1.0))
    if cls in (AR1, TwoSidedGeometric):
        return cls(_get_float(m, "rho"), _get_float(m, "scale", 1.0))
    if "coeffs" not in m:
        raise ModelError("missing model key 'coeffs'")
    try:
        coeffs = [float(t) for t in str(m["coeffs"]).replace(";", ",").split(",") if t.strip()]
        offset = int(str(m.get("offset", "0")).strip())
    except ValueError as err:
        raise ModelError(f"bad coefficient list: {err}") from None
    return cls(coeffs, offset)


def weights_to_mapping(w: WeightSequence) -> dict:
    out = {"p": _fmt(w.p), "d_plus": _fmt(w.d_plus), "d_minus": _fmt(w.d_minus)}
    if w.prefix_override:
        out["prefix_override"] = ", ".join(f"{k}:{_fmt(v)}" for k, v in w.prefix_override.items())
    return out


def weights_from_mapping(m: Mapping[str, str]) -> WeightSequence:
    if "p" not in m:
        raise ModelError("missing weights key 'p'")
    try:
        p = float(m["p"])
        dp = float(m.get("d_plus", 1.0))
        dm = float(m.get("d_minus", 1.0))
        over = {}
        for item in str(m.get("prefix_override", "")).split(","):
            if item.strip():
                k, v = item.split(":")
                over[int(k)] = float(v)
    except ValueError as err:
        raise ModelError(f"bad weights section: {err}") from None
    return WeightSequence(p, dp, dm, over)


def write_window_csv(window: CoefficientWindow, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["index", "value"])
        for m, a in zip(window.indices, window.coeffs):
            wr.writerow([int(m), repr(float(a))])


def read_window_csv(path, tail_mass=0.0) -> CoefficientWindow:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ModelError(f"{path}: no coefficient rows")
    idx = [int(r["index"]) for r in rows]
    if idx != list(range(idx[0], idx[0] + len(idx))):
        raise ModelError(f"{path}: indices must be consecutive")
    return CoefficientWindow([float(r["value"]) for r in rows], idx[0], tail_mass)
