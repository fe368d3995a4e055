"""Discrete Fourier analysis of embedding tables along the token index.

For a table with rows ``e(0) .. e(N-1)`` the transform is

    F[k] = N**-0.5 * sum_n e(n) * exp(-2j*pi*k*n / N),

one complex coefficient per embedding dimension, at the discrete frequencies
``nu = k / N``.  ``power[k]`` is the squared Euclidean norm of row k of the
coefficients, and ``norm_mag`` is that power divided by its median over the
non-zero frequencies, which puts tables of very different scales on one axis.

The harmonic set of a period T that divides N is ``{0, N/T, 2N/T, ...}``; the
harmonic power Phi_T sums ``power`` over its non-zero members.  Together with
``power[0]`` and the off-harmonic remainder this partitions the total power.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ValidationError
from .validation import as_matrix, check_period

METHODS = ("direct", "fft")
NORM_KINDS = ("power", "magnitude")

# Row-block size for the direct transform keeps the twiddle slab near 64 MB.
_DIRECT_BLOCK_ELEMENTS = 1 << 22


@dataclass(frozen=True, eq=False)
class Spectrum:
    """DFT coefficients of a table plus per-frequency power summaries."""

    coeffs: np.ndarray
    power: np.ndarray
    norm_mag: np.ndarray
    norm_kind: str = "power"
    median_includes_dc: bool = False

    @property
    def n_tokens(self) -> int:
        return self.coeffs.shape[0]

    @property
    def dim(self) -> int:
        return self.coeffs.shape[1]

    def frequencies(self) -> np.ndarray:
        """The frequency grid nu = k / n_tokens."""
        n = self.n_tokens
        return np.arange(n) / n


@dataclass(frozen=True)
class HarmonicSet:
    """Coefficient indices belonging to the multiples of 1/period."""

    period: int
    indices: tuple

    @property
    def nonzero_indices(self) -> tuple:
        return self.indices[1:]


@dataclass(frozen=True)
class SpikeRow:
    """One row of a spike report: strength of the 1/period line."""

    period: int
    harmonic_power: float
    peak_norm_mag: float
    prominence: float


def dft(
    x,
    *,
    method: str = "direct",
    norm_kind: str = "power",
    median_includes_dc: bool = False,
) -> Spectrum:
    """Transform a table along the token index.

    ``method="direct"`` evaluates the defining sum with explicit twiddle
    factors and is the reference implementation; ``method="fft"`` produces
    the same coefficients through ``numpy.fft`` and is faster for large
    tables of any length.
    """
    values = as_matrix(x)
    n = values.shape[0]
    if method == "direct":
        coeffs = _direct_dft(values)
    elif method == "fft":
        coeffs = np.fft.fft(values, axis=0) / np.sqrt(n)
    else:
        raise ValidationError(f"unknown method {method!r}; use one of {METHODS}")
    power = np.abs(coeffs) ** 2
    power = power.sum(axis=1)
    norm_mag = _median_normalize(power, norm_kind, median_includes_dc)
    return Spectrum(
        coeffs=coeffs,
        power=power,
        norm_mag=norm_mag,
        norm_kind=norm_kind,
        median_includes_dc=median_includes_dc,
    )


def _direct_dft(values: np.ndarray) -> np.ndarray:
    n = values.shape[0]
    scale = 1.0 / np.sqrt(n)
    tokens = np.arange(n)
    block = max(1, _DIRECT_BLOCK_ELEMENTS // n)
    coeffs = np.empty((n, values.shape[1]), dtype=np.complex128)
    for start in range(0, n, block):
        k = np.arange(start, min(start + block, n))
        twiddle = np.exp((-2j * np.pi / n) * np.outer(k, tokens))
        coeffs[start : start + len(k)] = scale * (twiddle @ values)
    return coeffs


def _median_normalize(power: np.ndarray, norm_kind: str, include_dc: bool) -> np.ndarray:
    if norm_kind not in NORM_KINDS:
        raise ValidationError(
            f"unknown norm_kind {norm_kind!r}; use one of {NORM_KINDS}"
        )
    # Bins holding only round-off residue from the transform (at most about
    # 1e-28 of the total in double precision) count as silent; this keeps
    # mathematically zero bins from polluting the median.
    silent = power.sum() * 1e-24
    quantity = np.where(power > silent, power, 0.0)
    if norm_kind == "magnitude":
        quantity = np.sqrt(quantity)
    reference = quantity if include_dc else quantity[1:]
    median = float(np.median(reference)) if reference.size else 0.0
    if median > 0.0:
        return quantity / median
    # Degenerate spectra (e.g. a constant table) have an all-zero reference;
    # report inf where there is signal and 0 elsewhere.
    out = np.zeros_like(quantity)
    out[quantity > 0] = np.inf
    return out


def harmonic_set(n_tokens: int, period: int) -> HarmonicSet:
    """Indices of the multiples of 1/period on the N-point grid."""
    check_period(n_tokens, period)
    step = n_tokens // period
    return HarmonicSet(
        period=period, indices=tuple(step * ell for ell in range(period))
    )


def harmonic_power(spectrum: Spectrum, period: int) -> float:
    """Total power at the non-zero multiples of 1/period (DC excluded)."""
    hs = harmonic_set(spectrum.n_tokens, period)
    idx = np.asarray(hs.nonzero_indices, dtype=np.intp)
    return float(np.sum(spectrum.power[idx]))


def off_harmonic_power(spectrum: Spectrum, period: int) -> float:
    """Total power at frequencies outside the harmonic set of *period*."""
    hs = harmonic_set(spectrum.n_tokens, period)
    mask = np.ones(spectrum.n_tokens, dtype=bool)
    mask[np.asarray(hs.indices, dtype=np.intp)] = False
    return float(np.sum(spectrum.power[mask]))


def spike_report(spectrum: Spectrum, periods) -> tuple:
    """Strength of the 1/T line for each requested period, sorted by period.

    ``peak_norm_mag`` is the median-normalized value at nu = 1/T and
    ``prominence`` divides it by the median level over the off-harmonic
    frequencies, so the spike is judged against the typical background
    rather than against whatever happens to sit in the two adjacent bins.
    DC and the 1/T multiples never count as background.  A silent
    background yields inf.
    """
    rows = []
    for period in sorted(set(int(p) for p in periods)):
        check_period(spectrum.n_tokens, period)
        k = spectrum.n_tokens // period
        phi = harmonic_power(spectrum, period)
        peak = float(spectrum.norm_mag[k])
        background = np.ones(spectrum.n_tokens, dtype=bool)
        background[list(harmonic_set(spectrum.n_tokens, period).indices)] = False
        floor = (
            float(np.median(spectrum.norm_mag[background]))
            if background.any()
            else 0.0
        )
        prominence = peak / floor if floor > 0 else float("inf")
        rows.append(
            SpikeRow(
                period=period,
                harmonic_power=phi,
                peak_norm_mag=peak,
                prominence=prominence,
            )
        )
    return tuple(rows)
