"""Synthetic embedding tables with controlled periodic structure.

:func:`construct` builds the one-dimensional table

    e(n) = A * (n mod T) + B * floor(n / T),      n = 0 .. K*T - 1.

The first term separates the T residue classes with even spacing A; the
second adds a between-block drift that leaves every class mean, and hence the
harmonic power at the multiples of 1/T, exactly unchanged while inflating the
within-class spread.  Scaling B therefore dissociates the spectrum from
linear separability: once B > (T-1)*A consecutive blocks occupy disjoint
intervals of the line, the classes interleave, and no classifier that carves
the line into at most T intervals can exceed

    ceiling = 1/T + (T-1) / (K*T).

Choosing K = ceil((T-1)/(T*epsilon)) caps the excess over chance at epsilon.
:func:`best_interval_accuracy` searches that interval ceiling exactly, and
:func:`ideal_circle` / :func:`zero_harmonic_table` provide reference tables
with perfectly circular and spectrally flat class structure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ValidationError
from .io import EmbeddingTable
from .validation import as_matrix, check_period

PRESETS = ("interleaved", "separable")

# Multipliers for the block scale B relative to A*(T-1); the interleaved
# preset stays above the regime threshold B > (T-1)*A with margin and the
# pair keeps a 700x ratio, i.e. a 4.9e5x ratio of within-class variances.
_PRESET_FACTORS = {"interleaved": 4.2, "separable": 0.006}


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the periodic construction.

    ``power_target`` is the harmonic power Phi_T the table should carry at
    the multiples of 1/period; the class spacing ``amplitude`` is derived
    from it.  ``block_scale`` is the drift coefficient B.
    """

    period: int
    epsilon: float
    power_target: float
    block_scale: float

    def __post_init__(self):
        if self.period < 2:
            raise ValidationError(f"period must be at least 2, got {self.period}")
        if not 0.0 < self.epsilon < 1.0:
            raise ValidationError(
                f"epsilon must lie in (0, 1), got {self.epsilon}"
            )
        if self.power_target < 0.0:
            raise ValidationError("power_target must be non-negative")
        if self.block_scale < 0.0:
            raise ValidationError("block_scale must be non-negative")

    @property
    def k_blocks(self) -> int:
        # The nudge guards float roundoff in the ceiling (for example
        # eps = 0.075 with T = 10 would otherwise round 12 up to 13).
        ratio = (self.period - 1) / (self.period * self.epsilon)
        return max(1, math.ceil(ratio - 1e-9))

    @property
    def n_tokens(self) -> int:
        return self.k_blocks * self.period

    @property
    def amplitude(self) -> float:
        t, k = self.period, self.k_blocks
        return math.sqrt(12.0 * self.power_target / (k * t * (t * t - 1)))

    @property
    def accuracy_ceiling(self) -> float:
        t, k = self.period, self.k_blocks
        return 1.0 / t + (t - 1) / (k * t)

    @property
    def interleaved(self) -> bool:
        return self.block_scale > (self.period - 1) * self.amplitude

    @classmethod
    def from_amplitude(
        cls, period: int, epsilon: float, amplitude: float, block_scale: float
    ) -> "SynthSpec":
        """Build a spec with the class spacing given directly."""
        if amplitude < 0.0:
            raise ValidationError("amplitude must be non-negative")
        probe = cls(
            period=period,
            epsilon=epsilon,
            power_target=1.0,
            block_scale=block_scale,
        )
        t, k = period, probe.k_blocks
        power = amplitude * amplitude * k * t * (t * t - 1) / 12.0
        return cls(
            period=period,
            epsilon=epsilon,
            power_target=power,
            block_scale=block_scale,
        )

    @classmethod
    def preset(
        cls, name: str, period: int, epsilon: float, amplitude: float = 1.0
    ) -> "SynthSpec":
        """The interleaved / separable pair with B tied to A*(T-1)."""
        if name not in PRESETS:
            raise ValidationError(f"unknown preset {name!r}; use one of {PRESETS}")
        block_scale = _PRESET_FACTORS[name] * (period - 1) * amplitude
        return cls.from_amplitude(period, epsilon, amplitude, block_scale)


@dataclass(frozen=True)
class SynthPrediction:
    """Closed-form expectations for a constructed table."""

    n_tokens: int
    k_blocks: int
    amplitude: float
    harmonic_power: float
    tr_between: float
    tr_within: float
    accuracy_ceiling: float
    interleaved: bool


def predict(spec: SynthSpec) -> SynthPrediction:
    t, k = spec.period, spec.k_blocks
    a, b = spec.amplitude, spec.block_scale
    return SynthPrediction(
        n_tokens=spec.n_tokens,
        k_blocks=k,
        amplitude=a,
        harmonic_power=a * a * k * t * (t * t - 1) / 12.0,
        tr_between=a * a * (t * t - 1) / 12.0,
        tr_within=b * b * (k * k - 1) / 12.0,
        accuracy_ceiling=spec.accuracy_ceiling,
        interleaved=spec.interleaved,
    )


def construct(spec: SynthSpec) -> EmbeddingTable:
    """Materialize the table e(n) = A*(n mod T) + B*floor(n/T)."""
    n = np.arange(spec.n_tokens)
    values = spec.amplitude * (n % spec.period) + spec.block_scale * (
        n // spec.period
    )
    label = (
        f"synth period={spec.period} epsilon={spec.epsilon:.12g} "
        f"amplitude={spec.amplitude:.12g} block_scale={spec.block_scale:.12g}"
    )
    return EmbeddingTable(values=values.reshape(-1, 1), label=label)


def ideal_circle(
    period: int, n_tokens: int, dim: int = 2, *, lift_seed: int | None = None
) -> EmbeddingTable:
    """Rows on the unit circle at angle 2*pi*(n mod T)/T.

    With ``dim > 2`` the circle is embedded in the first two coordinates and,
    when ``lift_seed`` is given, rotated by a seeded random orthogonal map so
    no coordinate is special.  Spectral summaries at period T assume T
    divides ``n_tokens``.
    """
    if dim < 2:
        raise ValidationError(f"dim must be at least 2, got {dim}")
    if period < 2:
        raise ValidationError(f"period must be at least 2, got {period}")
    if n_tokens < 2 * period:
        raise ValidationError("need at least two full cycles of the period")
    angles = 2.0 * np.pi * (np.arange(n_tokens) % period) / period
    values = np.zeros((n_tokens, dim))
    values[:, 0] = np.cos(angles)
    values[:, 1] = np.sin(angles)
    label = f"ideal-circle period={period} dim={dim}"
    if dim > 2 and lift_seed is not None:
        rng = np.random.default_rng(lift_seed)
        q, r = np.linalg.qr(rng.normal(size=(dim, dim)))
        q = q * np.sign(np.diag(r))
        values = values @ q.T
        label += f" lift_seed={lift_seed}"
    return EmbeddingTable(values=values, label=label)


def zero_harmonic_table(
    period: int, n_tokens: int, dim: int, *, seed: int = 0
) -> EmbeddingTable:
    """Gaussian table with the non-zero multiples of 1/period projected out.

    The deleted coefficient indices come in conjugate pairs, so the result is
    real; its harmonic power at the period is zero up to storage rounding,
    which forces the between-class scatter of the residue classes to vanish.
    """
    check_period(n_tokens, period)
    if dim < 1:
        raise ValidationError(f"dim must be at least 1, got {dim}")
    rng = np.random.default_rng(seed)
    values = rng.normal(size=(n_tokens, dim))
    coeffs = np.fft.fft(values, axis=0)
    step = n_tokens // period
    kill = step * np.arange(1, period)
    coeffs[kill] = 0.0
    values = np.fft.ifft(coeffs, axis=0).real
    label = f"zero-harmonic period={period} dim={dim} seed={seed}"
    return EmbeddingTable(values=values, label=label)


def best_interval_accuracy(x, labels, max_intervals: int) -> float:
    """Exact best accuracy of any <= max_intervals interval rule on a line.

    Points are sorted by their scalar value; the search maximizes, over all
    partitions of the sorted order into at most ``max_intervals`` contiguous
    intervals, the number of points matching their interval's majority label.
    Any classifier built from at most ``max_intervals`` intervals of the line
    (in particular any argmax of that many affine scores) is bounded by this.
    """
    values = as_matrix(x)
    if values.shape[1] != 1:
        raise ValidationError(
            f"interval search needs a 1-dim table, got dim {values.shape[1]}"
        )
    values = values.ravel()
    labels = np.asarray(labels)
    if labels.shape != values.shape:
        raise ValidationError(
            f"labels shape {labels.shape} does not match {values.shape}"
        )
    if labels.dtype.kind not in "iu" or (labels < 0).any():
        raise ValidationError("labels must be non-negative integers")
    if max_intervals < 1:
        raise ValidationError("max_intervals must be at least 1")

    order = np.argsort(values, kind="stable")
    lab = labels[order]
    n = lab.shape[0]
    n_classes = int(lab.max()) + 1
    # prefix[i, c] counts label c among the first i sorted points
    prefix = np.zeros((n + 1, n_classes), dtype=np.int64)
    np.cumsum(np.eye(n_classes, dtype=np.int64)[lab], axis=0, out=prefix[1:])

    neg = np.iinfo(np.int64).min // 2
    best = np.full(n + 1, neg, dtype=np.int64)
    best[0] = 0
    for _ in range(max_intervals):
        prev = best.copy()
        for j in range(1, n + 1):
            majority = (prefix[j] - prefix[:j]).max(axis=1)
            candidate = int((prev[:j] + majority).max())
            if candidate > best[j]:
                best[j] = candidate
    return float(best[n]) / n
