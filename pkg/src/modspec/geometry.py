"""Class-mean geometry of embedding tables under residue labels n mod T.

Rows are grouped by the residue of their index.  With T classes over N rows
the scatter matrices use uniform normalizations,

    S_B = (1/T) * sum_r (mu_r - mu)(mu_r - mu)^T
    S_W = (1/N) * sum_r sum_{n in class r} (e(n) - mu_r)(e(n) - mu_r)^T,

chosen so the traces line up with the token-index DFT without extra factors:
for balanced classes, N*tr(S_B) equals the harmonic power at the non-zero
multiples of 1/T and N*tr(S_W) equals the remaining non-harmonic power.  The
Fisher separability score is the largest eigenvalue of S_W^{-1} S_B, computed
by whitening with a Cholesky factor of S_W and a symmetric eigensolve.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .exceptions import SingularScatterError, ValidationError
from .spectral import dft, harmonic_power
from .validation import as_matrix, check_period

# Relative eigenvalue floor below which S_W counts as singular.
_SINGULAR_REL = 1e-13


@dataclass(frozen=True, eq=False)
class ScatterSummary:
    """Scatter matrices, Fisher score and its spectral sandwich bounds.

    ``bound_low <= fisher <= bound_high`` holds whenever S_W is invertible;
    for singular S_W the bounds are NaN and ``regularization`` records the
    ridge added to S_W before the whitening solve.  ``balanced`` is False
    when the period does not divide the table length, in which case the
    trace identities above do not apply.
    """

    period: int
    class_means: np.ndarray
    grand_mean: np.ndarray
    s_between: np.ndarray
    s_within: np.ndarray
    fisher: float
    cond_within: float
    bound_low: float
    bound_high: float
    lambda_min_within: float
    lambda_max_within: float
    regularization: float = 0.0
    balanced: bool = True


@dataclass(frozen=True)
class NoiseAnatomy:
    """One row of the spectrum-versus-geometry diagnostic table."""

    period: int
    harmonic_power: float
    tr_between: float
    tr_within: float
    lambda_min_within: float
    lambda_max_within: float
    cond_within: float
    fisher: float
    bound_low: float
    bound_high: float
    regularization: float


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


def _check_scatter_matrix(m, name: str) -> np.ndarray:
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValidationError(f"{name} has non-finite entries")
    scale = max(float(np.abs(arr).max()), 1.0)
    if float(np.abs(arr - arr.T).max()) > 1e-8 * scale:
        raise ValidationError(f"{name} is not symmetric")
    arr = 0.5 * (arr + arr.T)
    trace = float(np.trace(arr))
    lam_min = float(np.linalg.eigvalsh(arr)[0])
    if lam_min < -1e-9 * max(trace, 1.0):
        raise ValidationError(
            f"{name} is not positive semidefinite (lambda_min = {lam_min:.3e})"
        )
    return arr


def fisher_score(s_between, s_within) -> float:
    """Largest eigenvalue of S_W^{-1} S_B via Cholesky whitening.

    Raises :class:`SingularScatterError` when S_W has no Cholesky factor;
    callers that want a regularized answer should add a ridge themselves
    (see :func:`scatter`, which records the epsilon it used).
    """
    s_b = _check_scatter_matrix(s_between, "s_between")
    s_w = _check_scatter_matrix(s_within, "s_within")
    if s_b.shape != s_w.shape:
        raise ValidationError(
            f"shape mismatch: {s_b.shape} between vs {s_w.shape} within"
        )
    try:
        chol = np.linalg.cholesky(s_w)
    except np.linalg.LinAlgError as exc:
        raise SingularScatterError(
            "within-class scatter is singular; add a ridge before whitening"
        ) from exc
    half = solve_triangular(chol, s_b, lower=True)
    whitened = solve_triangular(chol, half.T, lower=True)
    whitened = 0.5 * (whitened + whitened.T)
    return float(np.linalg.eigvalsh(whitened)[-1])


def fisher_bounds(
    harmonic_pow: float, s_within, period: int, n_tokens: int
) -> tuple:
    """Sandwich bounds for the Fisher score from Phi_T and the S_W spectrum.

        low  = Phi_T / (N * (T-1) * lambda_max(S_W))
        high = Phi_T / (N *        lambda_min(S_W))

    so high/low = (T-1) * cond(S_W).  Raises when S_W is not invertible.
    """
    if period < 2:
        raise ValidationError(f"period must be at least 2, got {period}")
    if n_tokens < period:
        raise ValidationError("n_tokens must be at least the period")
    if harmonic_pow < 0:
        raise ValidationError("harmonic power must be non-negative")
    s_w = _check_scatter_matrix(s_within, "s_within")
    eigs = np.linalg.eigvalsh(s_w)
    lam_min, lam_max = float(eigs[0]), float(eigs[-1])
    if lam_min <= 0.0 or lam_min < _SINGULAR_REL * lam_max:
        raise SingularScatterError(
            f"within-class scatter is singular within tolerance "
            f"(lambda_min = {lam_min:.3e}, lambda_max = {lam_max:.3e})"
        )
    low = harmonic_pow / (n_tokens * (period - 1) * lam_max)
    high = harmonic_pow / (n_tokens * lam_min)
    return low, high


def _class_means(values: np.ndarray, period: int) -> np.ndarray:
    n, d = values.shape
    if n % period == 0:
        return values.reshape(n // period, period, d).mean(axis=0)
    labels = np.arange(n) % period
    means = np.empty((period, d))
    for r in range(period):
        means[r] = values[labels == r].mean(axis=0)
    return means


def scatter(x, period: int, *, allow_unbalanced: bool = False) -> ScatterSummary:
    """Scatter matrices and Fisher score of the residue classes.

    The period must divide the table length unless ``allow_unbalanced`` is
    set, in which case the matrices are still computed from per-class means
    but the summary is flagged ``balanced=False`` (the trace identities do
    not hold for unbalanced classes).
    """
    values = as_matrix(x)
    n, d = values.shape
    check_period(n, period, require_divides=not allow_unbalanced)
    balanced = n % period == 0

    class_means = _class_means(values, period)
    grand_mean = values.mean(axis=0)
    centered_means = class_means - grand_mean
    s_b = centered_means.T @ centered_means / period
    residuals = values - class_means[np.arange(n) % period]
    s_w = residuals.T @ residuals / n
    s_b = 0.5 * (s_b + s_b.T)
    s_w = 0.5 * (s_w + s_w.T)

    eigs_w = np.linalg.eigvalsh(s_w)
    lam_min, lam_max = float(eigs_w[0]), float(eigs_w[-1])
    singular = lam_min <= 0.0 or lam_min < _SINGULAR_REL * max(lam_max, 0.0)

    regularization = 0.0
    try:
        fisher = fisher_score(s_b, s_w)
    except SingularScatterError:
        trace_w = float(np.trace(s_w))
        regularization = 1e-10 * trace_w / d
        if regularization <= 0.0:
            fallback = max(float(np.trace(s_b)) / d, np.finfo(np.float64).tiny)
            regularization = 1e-10 * fallback
        fisher = fisher_score(s_b, s_w + regularization * np.eye(d))
        singular = True

    cond_within = lam_max / lam_min if not singular else math.inf
    if not singular:
        # Balanced classes make N*tr(S_B) equal Phi_T, so the bounds can be
        # formed without a transform; see noise_anatomy for the DFT route.
        phi = n * float(np.trace(s_b))
        bound_low, bound_high = fisher_bounds(phi, s_w, period, n)
    else:
        bound_low = bound_high = math.nan

    return ScatterSummary(
        period=period,
        class_means=_readonly(class_means),
        grand_mean=_readonly(grand_mean),
        s_between=_readonly(s_b),
        s_within=_readonly(s_w),
        fisher=fisher,
        cond_within=cond_within,
        bound_low=bound_low,
        bound_high=bound_high,
        lambda_min_within=lam_min,
        lambda_max_within=lam_max,
        regularization=regularization,
        balanced=balanced,
    )


def class_mean_dft_check(x, period: int) -> float:
    """Deviation between the class-mean transform and the table transform.

    The T-point DFT of the class means, scaled by sqrt(T/N), must reproduce
    the table coefficients at the multiples of 1/T when T divides N.  Returns
    the maximum componentwise deviation relative to max(1, largest reference
    magnitude).
    """
    values = as_matrix(x)
    n = values.shape[0]
    check_period(n, period)
    class_means = _class_means(values, period)

    r = np.arange(period)
    twiddle = np.exp((-2j * np.pi / period) * np.outer(r, r))
    mean_coeffs = (twiddle @ class_means) / np.sqrt(period)

    step = n // period
    harmonics = step * np.arange(period)
    tokens = np.arange(n)
    table_twiddle = np.exp((-2j * np.pi / n) * np.outer(harmonics, tokens))
    reference = np.sqrt(period / n) * (table_twiddle @ values) / np.sqrt(n)

    deviation = float(np.abs(mean_coeffs - reference).max())
    scale = max(1.0, float(np.abs(reference).max()))
    return deviation / scale


def noise_anatomy(x, period: int) -> NoiseAnatomy:
    """Spectrum and scatter diagnostics for one period, via both routes.

    Phi_T comes from the actual transform (not the trace identity), so the
    row pairs the spectral and geometric views of the same table.
    """
    values = as_matrix(x)
    spectrum = dft(values)
    phi = harmonic_power(spectrum, period)
    summary = scatter(values, period)
    if summary.regularization == 0.0:
        bound_low, bound_high = fisher_bounds(
            phi, summary.s_within, period, values.shape[0]
        )
    else:
        bound_low = bound_high = math.nan
    return NoiseAnatomy(
        period=period,
        harmonic_power=phi,
        tr_between=float(np.trace(summary.s_between)),
        tr_within=float(np.trace(summary.s_within)),
        lambda_min_within=summary.lambda_min_within,
        lambda_max_within=summary.lambda_max_within,
        cond_within=summary.cond_within,
        fisher=summary.fisher,
        bound_low=bound_low,
        bound_high=bound_high,
        regularization=summary.regularization,
    )
