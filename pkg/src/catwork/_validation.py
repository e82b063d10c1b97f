"""Input validation helpers shared by the public functions and estimators."""

import math

import numpy as np

from .exceptions import DimensionMismatchError, DomainError

NORM_TOL = 1e-12
RENORM_TOL = 1e-9


def check_beta(beta, allow_zero=True):
    beta = float(beta)
    if not math.isfinite(beta):
        raise DomainError(f"inverse temperature must be finite, got {beta!r}")
    if beta < 0 or (beta == 0 and not allow_zero):
        raise DomainError(f"inverse temperature out of range: {beta!r}")
    return beta


def check_real_vector(values, name="values"):
    arr = np.array(values, dtype=float).reshape(-1)
    if arr.size == 0:
        raise DomainError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite entries")
    return arr


def check_probability_vector(probs, renormalize=False, name="probs"):
    """Return a validated float copy of ``probs``.

    With ``renormalize`` the vector is rescaled when its sum is within
    ``RENORM_TOL`` of one and tiny negative round-off is clipped; otherwise
    the sum must already be within ``NORM_TOL``.
    """
    p = check_real_vector(probs, name)
    tol = RENORM_TOL if renormalize else NORM_TOL
    if np.any(p < -tol):
        raise DomainError(f"{name} has negative entries (min {p.min():.3e})")
    total = p.sum()
    if abs(total - 1.0) > tol:
        raise DomainError(f"{name} sums to {total!r}, not 1")
    if renormalize:
        p = np.clip(p, 0.0, None)
        p /= p.sum()
    return p


def check_square_matrix(matrix, name="matrix"):
    m = np.array(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise DimensionMismatchError(f"{name} must be a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DomainError(f"{name} contains non-finite entries")
    return m


def check_same_dim(a, b, what="operands"):
    if a != b:
        raise DimensionMismatchError(f"{what} have dimensions {a} and {b}")


def check_positive_int(value, name, minimum=1):
    if int(value) != value or value < minimum:
        raise DomainError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)
