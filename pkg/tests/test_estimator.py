"""Estimator: closed-form fixed points, safeguards, existence diagnostics."""

import math

import numpy as np
import pytest

from hyperbeta.core import (
    ArgumentError,
    BoundaryDegreeError,
    HyperbetaError,
    LayerSample,
    LayeredParams,
    make_rng,
)
from hyperbeta.estimator import (
    FitConfig,
    FitResult,
    existence_diagnostic,
    fit_all_layers,
    fit_layer,
    initial_beta,
)
from hyperbeta.likelihood import expected_degrees
from hyperbeta.sampler import sample_layer


def _interior_sample(n, s, seed, value=0.0):
    params = LayeredParams.constant(n, [s], value=value)
    rng = make_rng(seed)
    dmax = math.comb(n - 1, s - 1)
    while True:
        sample = sample_layer(params, s, rng)
        if not (np.any(sample.degrees == 0) or np.any(sample.degrees == dmax)):
            return sample


class TestClosedForms:
    def test_graph_constant_degree(self):
        # constant beta c solves 3 psi(2c) = 2, so c = ln(2)/2
        sample = LayerSample(n=4, s=2, degrees=np.array([2, 2, 2, 2]))
        fit = fit_layer(sample)
        assert fit.converged
        np.testing.assert_allclose(fit.beta_hat, math.log(2.0) / 2.0, atol=1e-12)
        assert fit.final_grad_norm < 1e-10

    def test_half_density_is_zero(self):
        sample = LayerSample(n=5, s=3, degrees=np.array([3, 3, 3, 3, 3]))
        fit = fit_layer(sample)
        np.testing.assert_allclose(fit.beta_hat, 0.0, atol=1e-12)

    def test_general_constant_degree_formula(self):
        # beta_hat = (1/s) logit(d / C(n-1, s-1)) for constant-degree data
        for n, s, d in [(6, 2, 3), (6, 3, 4), (7, 3, 10)]:
            sample = LayerSample(n=n, s=s, degrees=np.full(n, d))
            fit = fit_layer(sample)
            frac = d / math.comb(n - 1, s - 1)
            want = math.log(frac / (1 - frac)) / s
            np.testing.assert_allclose(fit.beta_hat, want, atol=1e-9)
            assert fit.final_grad_norm <= 1e-8 * float(n) ** (s - 1)

    def test_initial_point_exact_at_symmetric_data(self):
        # d = C(n-1, s-1) / 2 puts the constant MLE at exactly zero
        sample = LayerSample(n=5, s=2, degrees=np.full(5, 2))
        np.testing.assert_allclose(initial_beta(sample), 0.0, atol=1e-15)
        fit = fit_layer(sample)
        assert fit.iters == 0 and fit.converged


class TestFitBehavior:
    def test_moment_equations_at_convergence(self):
        sample = _interior_sample(8, 3, seed=1)
        config = FitConfig()
        fit = fit_layer(sample, config)
        assert fit.converged
        resid = np.abs(expected_degrees(fit.beta_hat, 8, 3) - sample.degrees)
        assert np.max(resid) <= config.tol_grad * 8.0 ** 2

    def test_equivariance_under_relabeling(self):
        sample = _interior_sample(7, 2, seed=2)
        fit = fit_layer(sample)
        perm = np.array([3, 0, 6, 2, 5, 1, 4])
        permuted = LayerSample(n=7, s=2, degrees=sample.degrees[perm])
        fit_perm = fit_layer(permuted)
        np.testing.assert_allclose(fit_perm.beta_hat, fit.beta_hat[perm], atol=1e-9)

    def test_newton_and_fixed_point_agree(self):
        sample = _interior_sample(7, 2, seed=3)
        fp = fit_layer(sample, FitConfig(newton_switch_iters=200))
        newton = fit_layer(sample, FitConfig(newton_switch_iters=0))
        assert fp.converged and newton.converged
        assert fp.method_used == "fixed-point"
        assert newton.method_used == "newton"
        assert np.max(np.abs(fp.beta_hat - newton.beta_hat)) <= 1e-6

    def test_boundary_degrees_raise(self):
        sample = LayerSample(n=4, s=2, degrees=np.array([0, 1, 2, 1]))
        with pytest.raises(BoundaryDegreeError):
            fit_layer(sample)
        full = LayerSample(n=4, s=2, degrees=np.array([3, 3, 3, 3]))
        with pytest.raises(BoundaryDegreeError):
            fit_layer(full)

    def test_non_convergence_is_a_result(self):
        sample = _interior_sample(8, 2, seed=4)
        fit = fit_layer(sample, FitConfig(max_iters=1, tol_grad=1e-14))
        assert isinstance(fit, FitResult)
        assert not fit.converged
        assert fit.iters == 1

    def test_bound_warning(self):
        sample = LayerSample(n=6, s=2, degrees=np.full(6, 4))
        fit = fit_layer(sample, FitConfig(bound_M=0.1))
        assert fit.converged
        assert fit.existence_warning is not None
        assert "bound" in fit.existence_warning

    def test_config_validation(self):
        with pytest.raises(ArgumentError):
            FitConfig(tol_grad=0.0)
        with pytest.raises(ArgumentError):
            FitConfig(damping=1.5)


class TestFitAllLayers:
    def test_symmetric_layers_all_zero(self):
        samples = {
            2: LayerSample(n=5, s=2, degrees=np.full(5, 2)),
            3: LayerSample(n=5, s=3, degrees=np.full(5, 3)),
        }
        results = fit_all_layers(samples)
        for s in (2, 3):
            assert isinstance(results[s], FitResult)
            np.testing.assert_allclose(results[s].beta_hat, 0.0, atol=1e-12)

    def test_failure_isolation(self):
        samples = {
            2: LayerSample(n=5, s=2, degrees=np.array([0, 1, 1, 1, 1])),
            3: LayerSample(n=5, s=3, degrees=np.full(5, 3)),
        }
        results = fit_all_layers(samples)
        assert isinstance(results[2], HyperbetaError)
        assert isinstance(results[3], FitResult)
        assert results[3].converged

    def test_permutation_equivariance_across_layers(self):
        sample = _interior_sample(6, 3, seed=5)
        perm = np.array([5, 3, 1, 0, 4, 2])
        direct = fit_all_layers({3: sample})[3]
        permuted = fit_all_layers(
            {3: LayerSample(n=6, s=3, degrees=sample.degrees[perm])}
        )[3]
        np.testing.assert_allclose(permuted.beta_hat, direct.beta_hat[perm],
                                   atol=1e-9)


class TestExistenceDiagnostic:
    def test_saturated_degrees_are_boundary(self):
        full = LayerSample(n=5, s=2, degrees=np.full(5, 4))
        assert existence_diagnostic(full) == "boundary"
        empty = LayerSample(n=5, s=2, degrees=np.zeros(5, dtype=int))
        assert existence_diagnostic(empty) == "boundary"

    def test_symmetric_half_density_is_interior(self):
        sample = LayerSample(n=5, s=3, degrees=np.full(5, 3))
        assert existence_diagnostic(sample) == "interior"

    def test_saturated_vertex_flagged(self):
        sample = LayerSample(n=4, s=2, degrees=np.array([3, 1, 1, 1]))
        assert existence_diagnostic(sample) in ("suspect", "boundary")

    def test_interior_degrees_with_divergent_iterates(self):
        # realizability forces the two high-degree vertices onto the
        # polytope boundary even though no single degree is extreme
        sample = LayerSample(n=6, s=2, degrees=np.array([4, 4, 1, 1, 1, 1]))
        assert existence_diagnostic(sample) == "suspect"
