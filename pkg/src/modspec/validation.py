"""Input-validation helpers used across modules."""
from __future__ import annotations

import numpy as np

from .exceptions import DivisibilityError, ValidationError


def preview_indices(indices, limit: int = 8) -> str:
    """Render a possibly long index list as a short message fragment."""
    indices = list(indices)
    if len(indices) <= limit:
        return ", ".join(str(i) for i in indices)
    head = ", ".join(str(i) for i in indices[:limit])
    return f"{head}, ... ({len(indices)} total)"


def as_matrix(x, *, dtype=np.float64) -> np.ndarray:
    """Coerce an embedding table or array-like to a validated 2-D float array.

    Accepts anything with a ``values`` attribute (an :class:`EmbeddingTable`)
    or a plain array-like.  1-D inputs are treated as a single column.  The
    result is always a fresh float array, so callers may compute in double
    precision regardless of how the table is stored.
    """
    values = getattr(x, "values", x)
    arr = np.asarray(values, dtype=dtype)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValidationError(f"expected a 2-D table, got shape {arr.shape}")
    n, d = arr.shape
    if n < 2 or d < 1:
        raise ValidationError(
            f"table must have at least 2 rows and 1 column, got shape {arr.shape}"
        )
    finite_rows = np.isfinite(arr).all(axis=1)
    if not finite_rows.all():
        bad = np.flatnonzero(~finite_rows)
        raise ValidationError(
            f"non-finite entries in rows {preview_indices(bad)}"
        )
    return arr


def check_period(n_tokens: int, period: int, *, require_divides: bool = True) -> None:
    """Validate a residue period against the table length."""
    if period < 2:
        raise ValidationError(f"period must be at least 2, got {period}")
    if period > n_tokens:
        raise ValidationError(
            f"period {period} exceeds the number of tokens {n_tokens}"
        )
    if require_divides and n_tokens % period != 0:
        raise DivisibilityError(
            f"period {period} does not divide the table length {n_tokens}"
        )
