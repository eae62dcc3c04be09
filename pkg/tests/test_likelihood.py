"""Likelihood kernels against closed forms and brute-force oracles."""

import math

import numpy as np
import pytest

from hyperbeta.core import (
    ArgumentError,
    DegreeCovariance,
    LayerSample,
    LayeredParams,
    NumericalError,
    enumerate_subsets,
    make_rng,
)
from hyperbeta.likelihood import (
    LikelihoodWorkspace,
    degree_covariance,
    expected_degrees,
    gamma_inverse_gap,
    gamma_surrogate,
    gradient,
    hessian_eigen_bounds,
    neg_log_likelihood,
)
from hyperbeta.oracle import fd_gradient, fd_hessian, oracle_neg_log_likelihood
from hyperbeta.sampler import sample_layer


def _random_sample(n, s, seed, beta=None):
    params = LayeredParams(
        n=n, r=max(2, s),
        layers={s: np.zeros(n) if beta is None else beta},
    )
    return sample_layer(params, s, make_rng(seed))


class TestNegLogLikelihood:
    def test_zero_beta_is_count_times_log2(self):
        sample = LayerSample(n=5, s=3, degrees=np.array([3, 3, 3, 3, 3]))
        assert neg_log_likelihood(np.zeros(5), sample) == pytest.approx(
            10 * math.log(2.0), abs=1e-12
        )

    def test_zero_beta_graph_case(self):
        sample = LayerSample(n=4, s=2, degrees=np.array([2, 2, 2, 2]))
        assert neg_log_likelihood(np.zeros(4), sample) == pytest.approx(
            6 * math.log(2.0), abs=1e-12
        )

    def test_matches_independent_exhaustive_summation(self):
        sample = _random_sample(4, 2, seed=2)
        beta = np.array([0.1, -0.2, 0.3, 0.0])
        assert neg_log_likelihood(beta, sample) == pytest.approx(
            oracle_neg_log_likelihood(beta, sample), rel=1e-13
        )

    def test_length_mismatch(self):
        sample = _random_sample(4, 2, seed=3)
        with pytest.raises(ArgumentError):
            neg_log_likelihood(np.zeros(5), sample)


class TestGradient:
    def test_symmetric_fixed_point(self):
        sample = LayerSample(n=5, s=3, degrees=np.array([3, 3, 3, 3, 3]))
        np.testing.assert_allclose(gradient(np.zeros(5), sample), 0.0, atol=1e-12)

    def test_zero_beta_closed_form(self):
        sample = _random_sample(6, 3, seed=4)
        expect = math.comb(5, 2) / 2.0 - sample.degrees
        np.testing.assert_allclose(gradient(np.zeros(6), sample), expect, atol=1e-12)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        sample = _random_sample(5, 2, seed=6)
        for _ in range(5):
            beta = rng.uniform(-1, 1, 5)
            np.testing.assert_allclose(
                gradient(beta, sample), fd_gradient(beta, sample, step=1e-5),
                atol=1e-6,
            )

    def test_edge_counting_identity(self):
        # sum_v grad_v = s * (sum_e psi - edge count): every edge appears
        # in exactly s coordinates
        sample = _random_sample(6, 3, seed=7)
        rng = np.random.default_rng(8)
        beta = rng.uniform(-0.8, 0.8, 6)
        psi_total = sum(
            1.0 / (1.0 + math.exp(-sum(beta[v] for v in e)))
            for e in enumerate_subsets(range(6), 3)
        )
        edges = int(sample.degrees.sum()) // 3
        assert gradient(beta, sample).sum() == pytest.approx(
            3 * (psi_total - edges), rel=1e-12
        )


class TestDegreeCovariance:
    def test_zero_beta_entries(self):
        cov = degree_covariance(np.zeros(5), 5, 3)
        np.testing.assert_allclose(np.diag(cov.sigma), 1.5)
        off = cov.sigma[~np.eye(5, dtype=bool)]
        np.testing.assert_allclose(off, 0.75)

    def test_eigenvalues_graph_case(self):
        cov = degree_covariance(np.zeros(4), 4, 2)
        eigs = np.linalg.eigvalsh(cov.sigma)
        np.testing.assert_allclose(eigs, [0.5, 0.5, 0.5, 1.5], atol=1e-12)

    def test_matches_finite_difference_hessian(self):
        rng = np.random.default_rng(9)
        sample = _random_sample(5, 2, seed=10)
        for _ in range(3):
            beta = rng.uniform(-1, 1, 5)
            np.testing.assert_allclose(
                degree_covariance(beta, 5, 2).sigma,
                fd_hessian(beta, sample, step=1e-4),
                atol=1e-5,
            )

    def test_row_sum_identity(self):
        # each edge through u contributes to exactly s-1 off-diagonal
        # cells of row u, so off-diagonal row sums are (s-1) * variance
        rng = np.random.default_rng(11)
        for s in (2, 3):
            beta = rng.uniform(-1, 1, 6)
            cov = degree_covariance(beta, 6, s)
            off_rows = cov.sigma.sum(axis=1) - np.diag(cov.sigma)
            np.testing.assert_allclose(off_rows, (s - 1) * np.diag(cov.sigma),
                                       rtol=1e-12)

    def test_rejects_degenerate_size(self):
        with pytest.raises(ArgumentError):
            degree_covariance(np.zeros(3), 3, 3)


class TestGammaSurrogate:
    def test_reciprocal_diagonal(self):
        cov = degree_covariance(np.zeros(5), 5, 3)
        gam = gamma_surrogate(cov)
        np.testing.assert_allclose(np.diag(gam), 1.0 / 1.5)
        assert np.all(gam[~np.eye(5, dtype=bool)] == 0.0)
        np.testing.assert_allclose(np.diag(gam) * np.diag(cov.sigma), 1.0)

    def test_degenerate_diagonal_rejected(self):
        broken = DegreeCovariance(
            n=2, s=2, sigma=np.array([[0.0, 0.0], [0.0, 1.0]]),
            gamma_diag=np.array([np.inf, 1.0]),
        )
        with pytest.raises(NumericalError):
            gamma_surrogate(broken)


class TestGammaInverseGap:
    def test_slope_near_minus_two_for_graphs(self):
        ns = [10, 20, 40]
        gaps = [gamma_inverse_gap(np.zeros(n), n, 2) for n in ns]
        slope = np.polyfit(np.log(ns), np.log(gaps), 1)[0]
        assert -2.6 <= slope <= -1.5

    def test_higher_layer_gap_smaller(self):
        g2 = gamma_inverse_gap(np.zeros(10), 10, 2)
        g3 = gamma_inverse_gap(np.zeros(10), 10, 3)
        assert g3 < g2

    def test_monotone_decreasing_in_n(self):
        gaps = [gamma_inverse_gap(np.zeros(n), n, 2) for n in (8, 12, 16, 24, 32)]
        assert all(a > b for a, b in zip(gaps, gaps[1:]))

    def test_single_edge_instance_rejected(self):
        with pytest.raises(ArgumentError):
            gamma_inverse_gap(np.zeros(3), 3, 3)


class TestHessianEigenBounds:
    def test_graph_closed_form(self):
        lo, hi = hessian_eigen_bounds(np.zeros(4), 4, 2)
        assert lo == pytest.approx(0.5, abs=1e-12)
        assert hi == pytest.approx(1.5, abs=1e-12)

    def test_symmetric_point_minimum(self):
        lo, _ = hessian_eigen_bounds(np.zeros(6), 6, 3)
        assert lo == pytest.approx((math.comb(5, 2) - math.comb(4, 1)) / 4.0,
                                   abs=1e-12)

    def test_positive_definite_on_random_draws(self):
        rng = np.random.default_rng(12)
        ref = np.zeros(8)
        for _ in range(100):
            beta = rng.uniform(-2, 2, 8)
            lo, hi = hessian_eigen_bounds(beta, 8, 3, bound_M=2.0, beta_ref=ref)
            assert lo > 0.0
            assert hi >= lo


class TestWorkspace:
    def test_cache_matches_fresh_evaluations(self):
        sample = _random_sample(6, 3, seed=13)
        ws = LikelihoodWorkspace(sample)
        rng = np.random.default_rng(14)
        for _ in range(4):
            beta = rng.uniform(-1, 1, 6)
            np.testing.assert_allclose(ws.expected_degrees(beta),
                                       expected_degrees(beta, 6, 3), rtol=1e-14)
            assert ws.neg_log_likelihood(beta) == pytest.approx(
                neg_log_likelihood(beta, sample), rel=1e-14
            )
            np.testing.assert_allclose(ws.gradient(beta),
                                       gradient(beta, sample), rtol=1e-12, atol=1e-12)

    def test_cache_reuses_pass_for_identical_point(self, monkeypatch):
        sample = _random_sample(6, 2, seed=15)
        ws = LikelihoodWorkspace(sample)
        calls = {"count": 0}
        import hyperbeta.likelihood as lk

        original = lk.edge_sums

        def counting_edge_sums(beta, idx):
            calls["count"] += 1
            return original(beta, idx)

        monkeypatch.setattr(lk, "edge_sums", counting_edge_sums)
        beta = np.full(6, 0.25)
        ws.neg_log_likelihood(beta)
        ws.expected_degrees(beta)
        ws.gradient(beta)
        assert calls["count"] == 1
        ws.expected_degrees(np.full(6, -0.25))
        assert calls["count"] == 2
