"""Synthetic periodic tables: closed-form predictions and interval ceilings."""
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modspec import (
    DivisibilityError,
    SynthSpec,
    ValidationError,
    best_interval_accuracy,
    construct,
    dft,
    harmonic_power,
    ideal_circle,
    off_harmonic_power,
    predict,
    scatter,
    zero_harmonic_table,
)


def measured_phi(table, period):
    return harmonic_power(dft(table, method="fft"), period)


class TestSpec:
    def test_block_count_formula(self):
        spec = SynthSpec(period=2, epsilon=0.005, power_target=1.0, block_scale=1.0)
        assert spec.k_blocks == 100
        assert spec.n_tokens == 200

    def test_block_count_rounds_up(self):
        spec = SynthSpec(period=5, epsilon=0.021, power_target=1.0, block_scale=1.0)
        # (T-1)/(T*eps) = 38.09..., so 39 blocks are needed.
        assert spec.k_blocks == 39

    def test_block_count_resists_float_roundoff(self):
        # (T-1)/(T*eps) is exactly 12 in real arithmetic but floats land
        # a hair above; the ceiling must not jump to 13.
        spec = SynthSpec(period=10, epsilon=0.075, power_target=1.0, block_scale=1.0)
        assert spec.k_blocks == 12

    def test_ceiling_within_epsilon_of_chance(self):
        for period in (2, 3, 5, 10):
            for epsilon in (0.4, 0.1, 0.02, 0.0075):
                spec = SynthSpec(
                    period=period, epsilon=epsilon, power_target=1.0, block_scale=1.0
                )
                assert spec.accuracy_ceiling <= 1.0 / period + epsilon * (1 + 1e-8)
                assert spec.accuracy_ceiling == pytest.approx(
                    1.0 / period + (period - 1) / spec.n_tokens
                )

    def test_amplitude_power_round_trip(self):
        spec = SynthSpec(period=7, epsilon=0.05, power_target=3.5, block_scale=0.2)
        rebuilt = SynthSpec.from_amplitude(7, 0.05, spec.amplitude, 0.2)
        assert rebuilt.power_target == pytest.approx(3.5, rel=1e-12)
        assert SynthSpec.from_amplitude(7, 0.05, 2.0, 0.2).amplitude == pytest.approx(
            2.0, rel=1e-12
        )

    def test_interleaved_flag_threshold(self):
        above = SynthSpec.from_amplitude(4, 0.1, 1.0, 3.0 + 1e-9)
        below = SynthSpec.from_amplitude(4, 0.1, 1.0, 3.0 - 1e-9)
        assert above.interleaved
        assert not below.interleaved

    def test_presets(self):
        inter = SynthSpec.preset("interleaved", 10, 0.075, amplitude=5.0)
        sep = SynthSpec.preset("separable", 10, 0.075, amplitude=5.0)
        assert inter.block_scale == pytest.approx(4.2 * 9 * 5.0)
        assert sep.block_scale == pytest.approx(0.006 * 9 * 5.0)
        assert inter.interleaved
        assert not sep.interleaved
        assert inter.power_target == pytest.approx(sep.power_target)

    def test_zero_amplitude_allowed(self):
        spec = SynthSpec(period=3, epsilon=0.1, power_target=0.0, block_scale=1.0)
        assert spec.amplitude == 0.0
        table = construct(spec)
        assert measured_phi(table, 3) <= 1e-12

    def test_validation(self):
        with pytest.raises(ValidationError):
            SynthSpec(period=1, epsilon=0.1, power_target=1.0, block_scale=1.0)
        with pytest.raises(ValidationError):
            SynthSpec(period=3, epsilon=0.0, power_target=1.0, block_scale=1.0)
        with pytest.raises(ValidationError):
            SynthSpec(period=3, epsilon=1.0, power_target=1.0, block_scale=1.0)
        with pytest.raises(ValidationError):
            SynthSpec(period=3, epsilon=0.1, power_target=-1.0, block_scale=1.0)
        with pytest.raises(ValidationError):
            SynthSpec(period=3, epsilon=0.1, power_target=1.0, block_scale=-0.5)
        with pytest.raises(ValidationError):
            SynthSpec.from_amplitude(3, 0.1, -1.0, 1.0)
        with pytest.raises(ValidationError):
            SynthSpec.preset("spiral", 3, 0.1)


class TestConstruct:
    def test_values_match_definition(self):
        spec = SynthSpec.from_amplitude(3, 0.4, 2.0, 10.0)
        table = construct(spec)
        n = np.arange(spec.n_tokens)
        expected = 2.0 * (n % 3) + 10.0 * (n // 3)
        np.testing.assert_allclose(table.values[:, 0], expected.astype(np.float32))

    def test_harmonic_power_matches_prediction(self):
        for period, epsilon in ((2, 0.3), (5, 0.05), (10, 0.075)):
            spec = SynthSpec.preset("interleaved", period, epsilon, amplitude=5.0)
            prediction = predict(spec)
            table = construct(spec)
            assert measured_phi(table, period) == pytest.approx(
                prediction.harmonic_power, rel=1e-6
            )

    def test_harmonic_power_independent_of_block_scale(self):
        """The drift term never leaks into the 1/T lines."""
        quiet = SynthSpec.from_amplitude(6, 0.1, 1.5, 0.001)
        loud = SynthSpec.from_amplitude(6, 0.1, 1.5, 250.0)
        assert predict(quiet).harmonic_power == predict(loud).harmonic_power
        phi_quiet = measured_phi(construct(quiet), 6)
        phi_loud = measured_phi(construct(loud), 6)
        assert phi_loud == pytest.approx(phi_quiet, rel=1e-5)

    def test_scatter_traces_match_prediction(self):
        spec = SynthSpec.from_amplitude(4, 0.05, 1.25, 7.0)
        prediction = predict(spec)
        summary = scatter(construct(spec), 4)
        assert np.trace(summary.s_between) == pytest.approx(
            prediction.tr_between, rel=1e-6
        )
        assert np.trace(summary.s_within) == pytest.approx(
            prediction.tr_within, rel=1e-6
        )

    def test_within_scatter_grows_with_block_scale(self):
        base = predict(SynthSpec.from_amplitude(5, 0.1, 1.0, 1.0)).tr_within
        loud = predict(SynthSpec.from_amplitude(5, 0.1, 1.0, 10.0)).tr_within
        assert loud == pytest.approx(100.0 * base, rel=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(
        period=st.integers(min_value=2, max_value=8),
        epsilon=st.floats(min_value=0.02, max_value=0.5),
        amplitude=st.floats(min_value=0.1, max_value=10.0),
        block_scale=st.floats(min_value=0.0, max_value=50.0),
    )
    def test_prediction_property(self, period, epsilon, amplitude, block_scale):
        spec = SynthSpec.from_amplitude(period, epsilon, amplitude, block_scale)
        prediction = predict(spec)
        table = construct(spec)
        assert table.n_tokens == prediction.n_tokens
        # Tables are stored as float32, so each entry carries up to half an
        # ulp of the peak value in rounding noise; the worst case it can add
        # to the harmonic power is 2*sqrt((T-1) N phi) u M + (T-1) N (u M)^2.
        n = prediction.n_tokens
        peak = amplitude * (period - 1) + block_scale * (spec.k_blocks - 1)
        noise = 2.0**-24 * max(peak, 1e-30) * math.sqrt(n * (period - 1))
        quant = 2.0 * math.sqrt(prediction.harmonic_power) * noise + noise**2
        phi = measured_phi(table, period)
        assert abs(phi - prediction.harmonic_power) <= max(
            1e-5 * prediction.harmonic_power, quant, 1e-9
        )
        summary = scatter(table, period)
        assert np.trace(summary.s_within) == pytest.approx(
            prediction.tr_within, rel=1e-5, abs=max(1e-9, quant / n)
        )


def brute_force_interval_accuracy(values, labels, max_intervals):
    order = np.argsort(values)
    lab = np.asarray(labels)[order]
    n = lab.shape[0]
    best = 0
    for parts in range(1, max_intervals + 1):
        for cuts in itertools.combinations(range(1, n), parts - 1):
            edges = (0,) + cuts + (n,)
            correct = 0
            for a, b in zip(edges, edges[1:]):
                counts = np.bincount(lab[a:b])
                correct += counts.max() if counts.size else 0
            best = max(best, correct)
    return best / n


class TestIntervalCeiling:
    def test_sorted_labels_are_perfectly_separable(self):
        values = np.arange(8.0)
        labels = np.array([0, 0, 1, 1, 2, 2, 3, 3])
        assert best_interval_accuracy(values, labels, 4) == 1.0

    def test_single_interval_is_majority_rate(self):
        values = np.arange(6.0)
        labels = np.array([0, 1, 0, 1, 0, 0])
        assert best_interval_accuracy(values, labels, 1) == pytest.approx(4 / 6)

    def test_alternating_labels_with_two_intervals(self):
        values = np.arange(10.0)
        labels = np.arange(10) % 2
        expected = brute_force_interval_accuracy(values, labels, 2)
        assert best_interval_accuracy(values, labels, 2) == pytest.approx(expected)

    def test_monotone_in_interval_budget(self):
        rng = np.random.default_rng(41)
        values = rng.normal(size=30)
        labels = rng.integers(0, 3, size=30)
        accs = [best_interval_accuracy(values, labels, m) for m in range(1, 6)]
        assert all(b >= a for a, b in zip(accs, accs[1:]))
        assert accs[-1] <= 1.0

    @settings(max_examples=30, deadline=None)
    @given(
        n=st.integers(min_value=2, max_value=9),
        n_classes=st.integers(min_value=1, max_value=3),
        max_intervals=st.integers(min_value=1, max_value=4),
        seed=st.integers(min_value=0, max_value=2**32 - 1),
    )
    def test_matches_brute_force(self, n, n_classes, max_intervals, seed):
        rng = np.random.default_rng(seed)
        values = rng.permutation(n).astype(float)
        labels = rng.integers(0, n_classes, size=n)
        expected = brute_force_interval_accuracy(values, labels, max_intervals)
        got = best_interval_accuracy(values, labels, max_intervals)
        assert got == pytest.approx(expected)

    def test_interleaved_construction_attains_ceiling_exactly(self):
        """T intervals on the interleaved table hit 1/T + (T-1)/N on the dot."""
        for period, epsilon in ((2, 0.005), (3, 2 / 198), (5, 0.02)):
            spec = SynthSpec.preset("interleaved", period, epsilon)
            table = construct(spec)
            labels = np.arange(spec.n_tokens) % period
            best = best_interval_accuracy(table.values, labels, period)
            n = spec.n_tokens
            assert round(best * n) == spec.k_blocks + period - 1
            assert best == pytest.approx(spec.accuracy_ceiling, abs=1e-12)

    def test_separable_construction_beats_ceiling(self):
        spec = SynthSpec.preset("separable", 5, 0.02)
        table = construct(spec)
        labels = np.arange(spec.n_tokens) % 5
        best = best_interval_accuracy(table.values, labels, 5)
        assert best == 1.0

    def test_validation(self):
        with pytest.raises(ValidationError, match="1-dim"):
            best_interval_accuracy(np.zeros((4, 2)), np.zeros(4, dtype=int), 2)
        with pytest.raises(ValidationError, match="labels"):
            best_interval_accuracy(np.arange(4.0), np.zeros(3, dtype=int), 2)
        with pytest.raises(ValidationError, match="max_intervals"):
            best_interval_accuracy(np.arange(4.0), np.zeros(4, dtype=int), 0)


class TestReferenceTables:
    def test_ideal_circle_rows_have_unit_norm(self):
        table = ideal_circle(10, 100)
        norms = np.linalg.norm(table.values, axis=1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-6)

    def test_ideal_circle_is_purely_harmonic(self):
        table = ideal_circle(10, 100)
        spectrum = dft(table, method="fft")
        assert off_harmonic_power(spectrum, 10) < 1e-9 * spectrum.power.sum()

    def test_ideal_circle_lift_preserves_geometry(self):
        flat = ideal_circle(8, 64, dim=16)
        lifted = ideal_circle(8, 64, dim=16, lift_seed=1)
        assert np.abs(flat.values[:, 2:]).max() == 0.0
        gram_flat = flat.values @ flat.values.T
        gram_lift = lifted.values @ lifted.values.T
        np.testing.assert_allclose(gram_lift, gram_flat, atol=1e-5)

    def test_ideal_circle_validation(self):
        with pytest.raises(ValidationError):
            ideal_circle(4, 40, dim=1)
        with pytest.raises(ValidationError):
            ideal_circle(1, 40)
        with pytest.raises(ValidationError):
            ideal_circle(4, 7)

    def test_zero_harmonic_table_has_no_line_at_period(self):
        table = zero_harmonic_table(10, 1000, 4, seed=0)
        spectrum = dft(table, method="fft")
        total = spectrum.power.sum()
        assert harmonic_power(spectrum, 10) < 1e-10 * total
        # Killing T-1 of N lines removes almost no energy overall.
        assert total > 0.9 * 1000 * 4 * 0.5

    def test_zero_harmonic_class_means_collapse(self):
        table = zero_harmonic_table(6, 120, 3, seed=2)
        summary = scatter(table, 6)
        spread = np.abs(summary.class_means - summary.grand_mean).max()
        assert spread < 1e-5

    def test_zero_harmonic_requires_divisibility(self):
        with pytest.raises(DivisibilityError):
            zero_harmonic_table(7, 100, 2)

    def test_zero_harmonic_other_periods_untouched(self):
        table = zero_harmonic_table(10, 1000, 2, seed=3)
        spectrum = dft(table, method="fft")
        # Period 8 shares no non-zero harmonics with period 10 at N=1000
        # except where indices coincide; 1000/8=125 vs multiples of 100.
        assert harmonic_power(spectrum, 8) > 1e-3
