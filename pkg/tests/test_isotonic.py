import numpy as np
import pytest

from conftest import smoothed_isotonic_oracle
from wstress.errors import ValidationError
from wstress.isotonic import GridFunction, as_weights, pav, project, spav


class TestPav:
    def test_pools_violators_to_mean(self):
        # oracle: brute-force quadratic minimisation over block partitions
        oracle = smoothed_isotonic_oracle([3.0, 1.0, 2.0])
        out = pav([3.0, 1.0, 2.0])
        np.testing.assert_allclose(out, oracle, atol=1e-12)
        np.testing.assert_allclose(out, [2.0, 2.0, 2.0], atol=1e-12)

    def test_monotone_input_is_identity(self):
        np.testing.assert_array_equal(pav([1.0, 2.0, 3.0], [0.3, 2.0, 1.0]),
                                      [1.0, 2.0, 3.0])

    def test_weighted_pooling(self):
        # pooled weighted mean (2*1 + 0*3) / 4
        np.testing.assert_allclose(pav([2.0, 0.0], [1.0, 3.0]), [0.5, 0.5])

    def test_length_mismatch_raises(self):
        with pytest.raises(ValidationError):
            pav([1.0, 2.0], [1.0])

    def test_non_finite_raises(self):
        with pytest.raises(ValidationError):
            pav([1.0, np.nan])

    def test_all_zero_weights_raise(self):
        with pytest.raises(ValidationError):
            pav([1.0, 2.0], [0.0, 0.0])

    def test_idempotent_exactly(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            n = rng.integers(2, 40)
            v = rng.normal(size=n) * 10
            w = rng.uniform(0.1, 3.0, size=n)
            once = pav(v, w)
            np.testing.assert_array_equal(pav(once, w), once)

    def test_weighted_mean_preserved(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            n = rng.integers(2, 60)
            v = rng.normal(size=n) * 5
            w = rng.uniform(0.0, 2.0, size=n)
            if not w.any():
                w[0] = 1.0
            out = pav(v, w)
            assert abs(np.sum(w * out) - np.sum(w * v)) <= 1e-10 * max(1.0, np.abs(v).max())

    def test_output_monotone(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            n = rng.integers(2, 80)
            out = pav(rng.normal(size=n), rng.uniform(0.05, 2.0, size=n))
            assert np.all(np.diff(out) >= -1e-12)

    def test_matches_oracle_short_vectors(self):
        rng = np.random.default_rng(17)
        for _ in range(200):
            n = rng.integers(2, 7)
            v = rng.normal(size=n) * 4
            w = rng.uniform(0.1, 2.0, size=n)
            np.testing.assert_allclose(
                pav(v, w), smoothed_isotonic_oracle(v, w), atol=1e-9
            )


class TestSpav:
    def test_zero_smoothing_reproduces_pav(self):
        rng = np.random.default_rng(19)
        for _ in range(20):
            n = rng.integers(2, 30)
            v = rng.normal(size=n)
            w = rng.uniform(0.2, 2.0, size=n)
            np.testing.assert_array_equal(spav(v, w, zeta=0.0), pav(v, w))

    def test_negative_smoothing_raises(self):
        with pytest.raises(ValidationError):
            spav([1.0, 2.0], zeta=-1e-9)

    def test_large_smoothing_flattens_monotone_data(self):
        v = np.array([1.0, 2.0, 3.0])
        out = spav(v, zeta=100.0)
        assert np.all(np.diff(out) >= -1e-12)
        assert out.max() - out.min() < v.max() - v.min()
        assert abs(out.sum() - v.sum()) <= 1e-8  # unit weights: mean preserved

    def test_matches_qp_oracle(self):
        # small-n oracle via exhaustive active-set enumeration
        n = 3
        u = (np.arange(n) + 0.5) / n
        pen = 0.01 / np.diff(u) ** 2
        v = np.array([3.0, 1.0, 2.0])
        w = np.ones(n)
        np.testing.assert_allclose(
            spav(v, w, zeta=0.01), smoothed_isotonic_oracle(v, w, pen), atol=1e-9
        )

    def test_matches_qp_oracle_random(self):
        rng = np.random.default_rng(23)
        for _ in range(60):
            n = int(rng.integers(2, 7))
            u = (np.arange(n) + 0.5) / n
            zeta = float(rng.uniform(0.0, 0.05))
            pen = zeta / np.diff(u) ** 2
            v = rng.normal(size=n) * 3
            w = rng.uniform(0.1, 2.0, size=n)
            np.testing.assert_allclose(
                spav(v, w, zeta=zeta),
                smoothed_isotonic_oracle(v, w, pen),
                atol=1e-9,
            )

    def test_limit_to_pav(self):
        rng = np.random.default_rng(29)
        for _ in range(20):
            n = int(rng.integers(2, 9))
            v = rng.uniform(0.0, 1.0, size=n)
            w = rng.uniform(0.5, 1.5, size=n)
            gap = np.abs(spav(v, w, zeta=1e-8) - pav(v, w)).max()
            assert gap <= 1e-6

    def test_limit_trend(self):
        v = np.array([0.9, 0.1, 0.5, 0.4, 0.8])
        gaps = [
            np.abs(spav(v, zeta=z) - pav(v)).max() for z in (1e-2, 1e-4, 1e-6)
        ]
        assert gaps[0] >= gaps[1] >= gaps[2]


class TestProject:
    def test_monotone_function_unchanged(self):
        u = (np.arange(8) + 0.5) / 8
        f = GridFunction(u, np.sort(np.random.default_rng(3).normal(size=8)))
        out = project(f)
        np.testing.assert_array_equal(out.v, f.v)

    def test_decreasing_function_projects_to_mean(self):
        u = (np.arange(32) + 0.5) / 32
        f = GridFunction(u, -u)
        out = project(f)
        np.testing.assert_allclose(out.v, np.full(32, (-u).mean()), atol=1e-12)

    def test_constant_weights_match_unweighted(self):
        rng = np.random.default_rng(31)
        u = (np.arange(16) + 0.5) / 16
        v = rng.normal(size=16)
        f = GridFunction(u, v)
        np.testing.assert_allclose(
            project(f, np.full(16, 3.7)).v, project(f).v, atol=1e-12
        )

    def test_rejects_tied_abscissae(self):
        with pytest.raises(ValidationError):
            GridFunction(np.array([0.2, 0.2, 0.6]), np.array([1.0, 2.0, 3.0]))


class TestWeights:
    def test_rejects_negative(self):
        with pytest.raises(ValidationError):
            as_weights([-1.0, 1.0], 2)

    def test_accepts_zero_mixed_with_positive(self):
        w = as_weights([0.0, 1.0], 2)
        assert w.tolist() == [0.0, 1.0]
