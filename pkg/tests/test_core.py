"""Core numerics: stable kernels, enumeration, quantiles, stream seeds."""

import math

import numpy as np
import pytest

from hyperbeta.core import (
    ArgumentError,
    LayerSample,
    LayeredParams,
    chisq_quantile,
    derive_stream_seed,
    enumerate_subsets,
    log1p_exp,
    logistic,
    logit,
    make_rng,
    normal_cdf,
    normal_quantile,
    subset_index_array,
    substream,
)


class TestLogistic:
    def test_symmetry_point(self):
        assert logistic(0.0) == 0.5

    def test_reflection_identity(self):
        assert logistic(7.3) + logistic(-7.3) == pytest.approx(1.0, abs=1e-15)

    def test_exact_rational_value(self):
        # e^{ln 2} / (1 + e^{ln 2}) = 2/3
        assert logistic(math.log(2.0)) == pytest.approx(2.0 / 3.0, abs=1e-15)

    def test_no_overflow_and_monotone(self):
        x = np.linspace(-750, 750, 2001)
        y = logistic(x)
        assert np.all(np.isfinite(y))
        assert np.all(y >= 0) and np.all(y <= 1)
        assert np.all(np.diff(y) >= 0)


class TestLog1pExp:
    def test_at_zero(self):
        assert log1p_exp(0.0) == pytest.approx(math.log(2.0), abs=1e-16)

    def test_large_argument_asymptote(self):
        assert log1p_exp(1000.0) == pytest.approx(1000.0, abs=1e-12)

    def test_small_argument_series_value(self):
        # ln(1 + e^-40) evaluated with 60-digit decimal arithmetic
        expected = 4.248354255291589e-18
        assert log1p_exp(-40.0) == pytest.approx(expected, rel=1e-10)

    def test_relative_error_across_range(self):
        # against the two-branch formula evaluated pointwise in max precision
        for x in [-700.0, -30.0, -1.0, 0.5, 35.0, 700.0]:
            ref = math.log1p(math.exp(x)) if x < 30 else x + math.log1p(math.exp(-x))
            assert log1p_exp(x) == pytest.approx(ref, rel=1e-14)

    def test_derivative_is_logistic(self):
        # d/dx log(1+e^x) = logistic(x), finite differences on a grid
        x = np.linspace(-30, 30, 100)
        h = 1e-6
        fd = (log1p_exp(x + h) - log1p_exp(x - h)) / (2 * h)
        np.testing.assert_allclose(fd, logistic(x), atol=1e-6)


class TestEnumerateSubsets:
    def test_exhaustive_listing(self):
        assert list(enumerate_subsets({1, 2, 3}, 2)) == [(1, 2), (1, 3), (2, 3)]

    def test_count_six_choose_three(self):
        assert len(list(enumerate_subsets(range(1, 7), 3))) == 20

    def test_empty_ground_zero_k(self):
        assert list(enumerate_subsets(set(), 0)) == [()]

    def test_oversized_k_is_empty_stream(self):
        assert list(enumerate_subsets({1, 2}, 3)) == []

    def test_counts_match_binomial(self):
        for n in range(13):
            for k in range(n + 1):
                assert len(list(enumerate_subsets(range(n), k))) == math.comb(n, k)

    def test_lexicographic_order(self):
        rows = list(enumerate_subsets(range(5), 3))
        assert rows == sorted(rows)

    def test_index_array_matches_stream(self):
        idx = subset_index_array(6, 3)
        assert idx.shape == (20, 3)
        assert [tuple(r) for r in idx] == list(enumerate_subsets(range(6), 3))


class TestNormalQuantile:
    def test_median(self):
        assert normal_quantile(0.5) == 0.0

    def test_refined_97_5_percent_point(self):
        # bisection on the erfc-based CDF gives 1.959963985...
        assert abs(normal_quantile(0.975) - 1.9599639845400536) < 1e-9

    def test_antisymmetry(self):
        p = 0.123
        assert normal_quantile(p) + normal_quantile(1 - p) == pytest.approx(0.0, abs=1e-12)

    def test_roundtrip_identity(self):
        for p in np.linspace(0.001, 0.999, 97):
            assert normal_cdf(normal_quantile(p)) == pytest.approx(p, abs=1e-8)

    def test_domain_errors(self):
        for bad in (0.0, 1.0, -0.2, 1.3):
            with pytest.raises(ArgumentError):
                normal_quantile(bad)


class TestChisqQuantile:
    def test_dof1_value(self):
        # bisection on erf(sqrt(x/2)) = 0.95
        assert chisq_quantile(0.95, 1) == pytest.approx(3.8414588206941227, rel=1e-8)

    def test_dof2_closed_form(self):
        assert chisq_quantile(0.95, 2) == pytest.approx(-2.0 * math.log(0.05), rel=1e-8)

    def test_small_p_boundary(self):
        q = chisq_quantile(1e-10, 3)
        assert 0.0 < q < 1e-2

    def test_monotone_in_p_and_dof(self):
        assert chisq_quantile(0.5, 4) < chisq_quantile(0.9, 4)
        assert chisq_quantile(0.9, 2) < chisq_quantile(0.9, 5)

    def test_domain_errors(self):
        with pytest.raises(ArgumentError):
            chisq_quantile(0.0, 2)
        with pytest.raises(ArgumentError):
            chisq_quantile(0.5, 0)


class TestStreamSeeds:
    def test_determinism(self):
        a = make_rng(derive_stream_seed(99, 5)).integers(0, 1 << 62, 8)
        b = make_rng(derive_stream_seed(99, 5)).integers(0, 1 << 62, 8)
        np.testing.assert_array_equal(a, b)

    def test_no_collisions_across_replicates(self):
        firsts = {
            int(make_rng(derive_stream_seed(7, i)).integers(0, 1 << 63))
            for i in range(10_000)
        }
        assert len(firsts) == 10_000

    def test_distinct_across_master_seeds(self):
        firsts = {
            int(make_rng(derive_stream_seed(seed, 3)).integers(0, 1 << 63))
            for seed in range(10_000)
        }
        assert len(firsts) == 10_000

    def test_substream_independent_of_call_order(self):
        root = derive_stream_seed(1, 2)
        a = make_rng(substream(root, 3)).random(4)
        _ = make_rng(substream(root, 9)).random(4)
        b = make_rng(substream(root, 3)).random(4)
        np.testing.assert_array_equal(a, b)


class TestDomainTypes:
    def test_params_validation(self):
        with pytest.raises(ArgumentError):
            LayeredParams(n=5, r=3, layers={2: np.zeros(4)})
        with pytest.raises(ArgumentError):
            LayeredParams(n=5, r=3, layers={5: np.zeros(5)})
        with pytest.raises(ArgumentError):
            LayeredParams(n=5, r=3, layers={2: np.array([0, 0, 0, 0, np.inf])})
        with pytest.raises(ArgumentError):
            LayeredParams(n=5, r=3, layers={2: np.full(5, 2.0)}, bound=1.0)
        params = LayeredParams.constant(5, [2, 3], value=0.5, bound=1.0)
        assert params.layer_sizes == [2, 3]
        np.testing.assert_array_equal(params.layer(3), np.full(5, 0.5))

    def test_sample_validation(self):
        with pytest.raises(ArgumentError):
            LayerSample(n=4, s=2, degrees=np.array([4, 0, 0, 0]))  # above max
        with pytest.raises(ArgumentError):
            LayerSample(n=4, s=2, degrees=np.array([1, 1]))
        sample = LayerSample(n=3, s=2, degrees=np.array([2, 1, 1]),
                             edges=[(0, 1), (0, 2)])
        assert sample.edge_count == 2
        with pytest.raises(ArgumentError):
            LayerSample(n=3, s=2, degrees=np.array([2, 1, 1]), edges=[(0, 1)])

    def test_logit_roundtrip(self):
        x = np.linspace(-5, 5, 41)
        np.testing.assert_allclose(logit(logistic(x)), x, atol=1e-10)
