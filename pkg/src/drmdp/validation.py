"""Small input checks shared across modules."""

from __future__ import annotations

import numpy as np

from .exceptions import DimensionError, ValidationError

PROB_TOL = 1e-9


def as_float_array(x, name="array", ndim=None):
    arr = np.asarray(x, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise DimensionError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    return arr


def simplex_violation(rows, tol=PROB_TOL):
    """Return a description of the first way ``rows`` leaves the simplex, or ``None``."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if not np.all(np.isfinite(rows)):
        return "non-finite entry"
    if rows.min(initial=0.0) < -tol:
        return f"negative entry {rows.min():.3g}"
    if rows.max(initial=0.0) > 1.0 + tol:
        return f"entry {rows.max():.3g} above one"
    sums = rows.sum(axis=-1)
    worst = int(np.argmax(np.abs(sums - 1.0)))
    if abs(sums[worst] - 1.0) > tol:
        return f"row sums to {sums[worst]:.12g}"
    return None


def check_probability_rows(rows, name="distribution", tol=PROB_TOL):
    """Validate rows on the simplex and renormalize away slack within ``tol``."""
    rows = np.asarray(rows, dtype=float)
    problem = simplex_violation(rows, tol)
    if problem is not None:
        raise ValidationError(f"{name}: {problem}", [f"{name}: {problem}"])
    rows = np.clip(rows, 0.0, None)
    return rows / rows.sum(axis=-1, keepdims=True)


def check_probability_vector(p, name="probabilities", tol=PROB_TOL):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise DimensionError(f"{name} must be a nonempty vector")
    return check_probability_rows(p, name, tol)


def is_deterministic_row(row, tol=PROB_TOL):
    return bool(np.max(row) >= 1.0 - tol)
