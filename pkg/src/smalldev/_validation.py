"""Small input-validation helpers used across the package."""
import numbers

import numpy as np

from .exceptions import DomainError


def check_scalar(x, name, *, lower=None, upper=None, include_lower=True, include_upper=True,
                 exc=DomainError):
    if not isinstance(x, numbers.Real) or isinstance(x, bool):
        raise exc(f"{name} must be a real number, got {x!r}")
    x = float(x)
    if not np.isfinite(x):
        raise exc(f"{name} must be finite, got {x}")
    if lower is not None:
        if (x < lower) if include_lower else (x <= lower):
            op = ">=" if include_lower else ">"
            raise exc(f"{name} must be {op} {lower}, got {x}")
    if upper is not None:
        if (x > upper) if include_upper else (x >= upper):
            op = "<=" if include_upper else "<"
            raise exc(f"{name} must be {op} {upper}, got {x}")
    return x


def check_int(n, name, *, lower=None, exc=DomainError):
    if isinstance(n, bool) or not isinstance(n, numbers.Integral):
        raise exc(f"{name} must be an integer, got {n!r}")
    n = int(n)
    if lower is not None and n < lower:
        raise exc(f"{name} must be >= {lower}, got {n}")
    return n


def is_power_of_two(n):
    return n > 0 and (n & (n - 1)) == 0


def as_eigenvalues(lambdas):
    """Return a 1-D float array of nonnegative eigenvalues.

    Accepts a :class:`~smalldev.operator.Spectrum` or any array-like.
    """
    lam = getattr(lambdas, "eigenvalues", lambdas)
    lam = np.asarray(lam, dtype=float)
    if lam.ndim != 1:
        raise DomainError(f"eigenvalues must be one-dimensional, got shape {lam.shape}")
    if lam.size == 0:
        raise DomainError("eigenvalue list is empty")
    if not np.all(np.isfinite(lam)) or np.any(lam < 0):
        raise DomainError("eigenvalues must be finite and nonnegative")
    return lam
