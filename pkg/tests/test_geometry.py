"""Residue-class scatter matrices, Fisher score, and the trace identities."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modspec import (
    DivisibilityError,
    SingularScatterError,
    ValidationError,
    dft,
    fisher_bounds,
    fisher_score,
    harmonic_power,
    ideal_circle,
    noise_anatomy,
    off_harmonic_power,
    scatter,
)


def manual_class_means(values, period):
    labels = np.arange(values.shape[0]) % period
    return np.stack([values[labels == r].mean(axis=0) for r in range(period)])


class TestScatterBasics:
    def test_class_means_and_grand_mean(self):
        rng = np.random.default_rng(21)
        x = rng.normal(size=(20, 3))
        summary = scatter(x, 4)
        np.testing.assert_allclose(summary.class_means, manual_class_means(x, 4))
        np.testing.assert_allclose(summary.grand_mean, x.mean(axis=0))

    def test_matrices_symmetric_and_psd(self, random_tables):
        for table, period in random_tables[:10]:
            summary = scatter(table, period)
            for m in (summary.s_between, summary.s_within):
                np.testing.assert_allclose(m, m.T, atol=1e-12)
                assert np.linalg.eigvalsh(m)[0] > -1e-10

    def test_scatter_matrices_match_definitions(self):
        rng = np.random.default_rng(22)
        x = rng.normal(size=(12, 2))
        period = 3
        summary = scatter(x, period)
        means = manual_class_means(x, period)
        grand = x.mean(axis=0)
        centered = means - grand
        s_b = centered.T @ centered / period
        labels = np.arange(12) % period
        residuals = x - means[labels]
        s_w = residuals.T @ residuals / 12
        np.testing.assert_allclose(summary.s_between, s_b, atol=1e-12)
        np.testing.assert_allclose(summary.s_within, s_w, atol=1e-12)

    def test_period_must_divide_by_default(self):
        rng = np.random.default_rng(23)
        with pytest.raises(DivisibilityError):
            scatter(rng.normal(size=(10, 2)), 4)

    def test_unbalanced_classes_flagged(self):
        rng = np.random.default_rng(24)
        x = rng.normal(size=(10, 2))
        summary = scatter(x, 4, allow_unbalanced=True)
        assert not summary.balanced
        np.testing.assert_allclose(summary.class_means, manual_class_means(x, 4))


class TestTraceIdentities:
    def test_between_trace_equals_harmonic_power(self, random_tables):
        """N * tr(S_B) recovers the harmonic power of the 1/T multiples."""
        for table, period in random_tables:
            spectrum = dft(table, method="fft")
            phi = harmonic_power(spectrum, period)
            summary = scatter(table, period)
            n = table.n_tokens
            assert n * np.trace(summary.s_between) == pytest.approx(
                phi, rel=1e-9, abs=1e-12
            )

    def test_within_trace_equals_off_harmonic_power(self, random_tables):
        for table, period in random_tables:
            spectrum = dft(table, method="fft")
            off = off_harmonic_power(spectrum, period)
            summary = scatter(table, period)
            n = table.n_tokens
            assert n * np.trace(summary.s_within) == pytest.approx(
                off, rel=1e-9, abs=1e-12
            )

    @settings(max_examples=20, deadline=None)
    @given(
        reps=st.integers(min_value=2, max_value=8),
        period=st.integers(min_value=2, max_value=6),
        d=st.integers(min_value=1, max_value=3),
        seed=st.integers(min_value=0, max_value=2**32 - 1),
    )
    def test_trace_identities_property(self, reps, period, d, seed):
        x = np.random.default_rng(seed).normal(size=(reps * period, d))
        spectrum = dft(x, method="fft")
        summary = scatter(x, period)
        n = x.shape[0]
        assert n * np.trace(summary.s_between) == pytest.approx(
            harmonic_power(spectrum, period), rel=1e-9, abs=1e-12
        )
        assert n * np.trace(summary.s_within) == pytest.approx(
            off_harmonic_power(spectrum, period), rel=1e-9, abs=1e-12
        )


class TestFisherScore:
    def test_diagonal_case(self):
        s_w = np.diag([2.0, 1.0])
        s_b = np.diag([4.0, 3.0])
        assert fisher_score(s_b, s_w) == pytest.approx(3.0, rel=1e-12)

    def test_identity_within_reduces_to_top_eigenvalue(self):
        rng = np.random.default_rng(31)
        a = rng.normal(size=(3, 3))
        s_b = a @ a.T
        top = np.linalg.eigvalsh(s_b)[-1]
        assert fisher_score(s_b, np.eye(3)) == pytest.approx(top, rel=1e-10)

    def test_invariant_under_invertible_maps(self):
        rng = np.random.default_rng(32)
        x = rng.normal(size=(30, 4))
        period = 5
        base = scatter(x, period).fisher
        for _ in range(3):
            a = rng.normal(size=(4, 4)) + 4.0 * np.eye(4)
            mapped = scatter(x @ a.T, period).fisher
            assert mapped == pytest.approx(base, rel=1e-6)

    def test_singular_within_raises(self):
        s_b = np.eye(2)
        s_w = np.array([[1.0, 1.0], [1.0, 1.0]])
        with pytest.raises(SingularScatterError):
            fisher_score(s_b, s_w)

    def test_rejects_asymmetric_input(self):
        with pytest.raises(ValidationError, match="symmetric"):
            fisher_score(np.array([[1.0, 2.0], [0.0, 1.0]]), np.eye(2))

    def test_rejects_indefinite_input(self):
        with pytest.raises(ValidationError, match="positive semidefinite"):
            fisher_score(np.diag([1.0, -1.0]), np.eye(2))

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValidationError, match="mismatch"):
            fisher_score(np.eye(2), np.eye(3))


class TestFisherBounds:
    def test_sandwich_holds(self, random_tables):
        """bound_low <= fisher <= bound_high with the documented ratio."""
        for table, period in random_tables:
            summary = scatter(table, period)
            if summary.regularization > 0.0:
                continue
            slack = 1e-9 * max(1.0, abs(summary.fisher))
            assert summary.bound_low <= summary.fisher + slack
            assert summary.fisher <= summary.bound_high + slack
            ratio = summary.bound_high / summary.bound_low
            expected = (period - 1) * summary.cond_within
            assert ratio == pytest.approx(expected, rel=1e-9)

    def test_values_match_formula(self):
        rng = np.random.default_rng(33)
        x = rng.normal(size=(40, 3))
        summary = scatter(x, 4)
        spectrum = dft(x, method="fft")
        phi = harmonic_power(spectrum, 4)
        low, high = fisher_bounds(phi, summary.s_within, 4, 40)
        eigs = np.linalg.eigvalsh(summary.s_within)
        assert low == pytest.approx(phi / (40 * 3 * eigs[-1]), rel=1e-9)
        assert high == pytest.approx(phi / (40 * eigs[0]), rel=1e-9)

    def test_singular_within_raises(self):
        with pytest.raises(SingularScatterError):
            fisher_bounds(1.0, np.zeros((2, 2)), 3, 9)

    def test_rejects_negative_power(self):
        with pytest.raises(ValidationError):
            fisher_bounds(-1.0, np.eye(2), 3, 9)


class TestSingularHandling:
    def test_wide_table_gets_ridge(self):
        # d > N - T forces rank-deficient residuals.
        rng = np.random.default_rng(34)
        x = rng.normal(size=(8, 8))
        summary = scatter(x, 4)
        assert summary.regularization > 0.0
        assert math.isinf(summary.cond_within)
        assert math.isnan(summary.bound_low)
        assert math.isnan(summary.bound_high)
        assert math.isfinite(summary.fisher)

    def test_zero_within_scatter_gets_ridge(self):
        table = ideal_circle(4, 32)
        summary = scatter(table, 4)
        assert summary.regularization > 0.0
        assert summary.fisher > 1e6


class TestNoiseAnatomy:
    def test_matches_scatter_and_spectrum(self, random_tables):
        for table, period in random_tables[:10]:
            row = noise_anatomy(table, period)
            summary = scatter(table, period)
            spectrum = dft(table)
            assert row.period == period
            assert row.harmonic_power == pytest.approx(
                harmonic_power(spectrum, period), rel=1e-9
            )
            assert row.tr_between == pytest.approx(
                float(np.trace(summary.s_between)), rel=1e-12
            )
            assert row.tr_within == pytest.approx(
                float(np.trace(summary.s_within)), rel=1e-12
            )
            assert row.fisher == pytest.approx(summary.fisher, rel=1e-9)
            if row.regularization == 0.0:
                assert row.bound_low <= row.fisher * (1 + 1e-9)
                assert row.fisher <= row.bound_high * (1 + 1e-9)
