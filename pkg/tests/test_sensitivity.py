import numpy as np
import pytest

from wstress.errors import ValidationError
from wstress.reweight import WeightSet
from wstress.sensitivity import (
    bivariate_reverse_sensitivity,
    delta_measure,
    joint_tail_indicator_s,
    reverse_sensitivity,
    tail_indicator_s,
)


def weights_from(raw):
    return WeightSet(np.asarray(raw, dtype=float))


class TestReverseSensitivity:
    def test_comonotone_attains_one_exactly(self):
        rng = np.random.default_rng(3)
        s = rng.normal(size=500)
        w = weights_from(np.exp(0.5 * s))  # nondecreasing transform of s
        assert reverse_sensitivity(s, w).value == 1.0

    def test_counter_monotone_attains_minus_one_exactly(self):
        rng = np.random.default_rng(5)
        s = rng.normal(size=500)
        w = weights_from(np.exp(-0.5 * s))
        assert reverse_sensitivity(s, w).value == -1.0

    def test_unit_weights_give_zero(self):
        rng = np.random.default_rng(7)
        s = rng.normal(size=200)
        assert reverse_sensitivity(s, weights_from(np.ones(200))).value == 0.0

    def test_frozen_rearrangement_arithmetic(self):
        # mean(ws) = 2.75, mean(s) = 2.5, sorted pairing gives 3.0
        s = np.array([1.0, 2.0, 3.0, 4.0])
        w = weights_from([0.5, 1.5, 0.5, 1.5])
        res = reverse_sensitivity(s, w)
        assert res.numerator == pytest.approx(0.25)
        assert res.max_bound == pytest.approx(0.5)
        assert res.value == pytest.approx(0.5)

    def test_range_property(self):
        rng = np.random.default_rng(9)
        for _ in range(300):
            n = int(rng.integers(5, 200))
            s = rng.normal(size=n) * rng.uniform(0.1, 10)
            w = weights_from(rng.uniform(0.0, 2.0, size=n) + 1e-9)
            value = reverse_sensitivity(s, w).value
            assert -1.0 <= value <= 1.0

    def test_bounds_order(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            n = int(rng.integers(5, 100))
            s = rng.normal(size=n)
            w = weights_from(rng.uniform(0.0, 3.0, size=n) + 1e-9)
            res = reverse_sensitivity(s, w)
            assert res.min_bound - 1e-9 <= res.numerator <= res.max_bound + 1e-9

    def test_shuffle_null(self):
        rng = np.random.default_rng(13)
        n = 5000
        s = rng.normal(size=n)
        base = np.exp(0.4 * rng.normal(size=n))
        hits = 0
        for _ in range(200):
            w = weights_from(rng.permutation(base))
            if abs(reverse_sensitivity(s, w).value) <= 3.0 / np.sqrt(n):
                hits += 1
        assert hits >= 198  # >= 99% of shuffles

    def test_constant_s_reports_zero(self):
        w = weights_from(np.array([0.5, 1.5, 1.0]))
        assert reverse_sensitivity(np.full(3, 2.0), w).value == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            reverse_sensitivity(np.ones(3), weights_from(np.ones(4)))


class TestBivariate:
    def test_independent_pair_near_zero(self):
        # the normalised value of a sparse indicator is noisy at a single
        # draw, so the independence property is checked on the average of
        # repeated draws against the Monte Carlo tolerance
        rng = np.random.default_rng(17)
        n = 20_000
        values = []
        for _ in range(20):
            x_i = rng.normal(size=n)
            x_j = rng.normal(size=n)
            s = joint_tail_indicator_s(x_i, x_j, 0.8)
            w = weights_from(np.exp(0.3 * rng.normal(size=n)))  # independent of s
            values.append(abs(bivariate_reverse_sensitivity(s, w).value))
        assert np.mean(values) <= 3.0 / np.sqrt(n)

    def test_comonotone_joint_indicator(self):
        rng = np.random.default_rng(19)
        n = 5000
        x = rng.normal(size=n)
        s = joint_tail_indicator_s(x, x, 0.9)
        w = weights_from(1.0 + 2.0 * s)
        assert bivariate_reverse_sensitivity(s, w).value == 1.0


class TestDeltaMeasure:
    def test_independent_input_small(self):
        rng = np.random.default_rng(23)
        n = 100_000
        y = rng.normal(size=n)
        x = rng.normal(size=n)
        assert delta_measure(y, x) <= 0.05

    def test_perfect_dependence_large(self):
        rng = np.random.default_rng(29)
        n = 100_000
        x = rng.normal(size=n)
        assert delta_measure(x.copy(), x) >= 0.9

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(31)
        n = 20_000
        x = rng.lognormal(size=n)
        y = x + rng.normal(size=n)
        a = delta_measure(y, x)
        b = delta_measure(y, np.log(x))
        assert a == pytest.approx(b, abs=1e-12)

    def test_range(self):
        rng = np.random.default_rng(37)
        n = 5000
        y = rng.normal(size=n)
        x = 0.5 * y + rng.normal(size=n)
        val = delta_measure(y, x, bins=10, min_per_bin=50)
        assert 0.0 <= val <= 1.0

    def test_insufficient_samples(self):
        rng = np.random.default_rng(41)
        with pytest.raises(ValidationError):
            delta_measure(rng.normal(size=500), rng.normal(size=500))

    def test_weighted_version_runs(self):
        rng = np.random.default_rng(43)
        n = 20_000
        x = rng.normal(size=n)
        y = x + 0.5 * rng.normal(size=n)
        w = WeightSet(np.exp(0.2 * rng.normal(size=n)))
        val = delta_measure(y, x, weights=w)
        assert 0.0 < val < 1.0


class TestSFunctions:
    def test_tail_indicator_threshold(self):
        x = np.arange(100.0)
        s = tail_indicator_s(x, 0.9)
        assert s.sum() == pytest.approx(np.sum(x > np.quantile(x, 0.9)))
