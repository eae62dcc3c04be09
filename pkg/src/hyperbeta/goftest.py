"""Likelihood-ratio goodness-of-fit machinery for one layer.

The log LR statistic is the gap between the null and fitted negative
log-likelihoods; its normalized form

    lambda = (2 * log_lr - n) / sqrt(2 n)

is asymptotically standard normal under the null, giving a two-sided
level-alpha test.  A sup-norm alternative rejects when the fitted
parameters land far from the null in max norm, with a Monte Carlo
calibrated cutoff by default (the analytic constant in the 2C sqrt(log n
/ n^(s-1)) cutoff is non-constructive).  The effective-signal report
quantifies a specific alternative through the Mahalanobis-type quadratic
form that drives the test's power.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    ArgumentError,
    HyperbetaError,
    LayerSample,
    LayeredParams,
    NumericalError,
    make_rng,
    normal_cdf,
    normal_quantile,
    substream,
)
from .estimator import FitConfig, FitResult, fit_layer
from .likelihood import degree_covariance, neg_log_likelihood
from .sampler import sample_layer

__all__ = ["TestReport", "SignalReport", "lr_statistic", "lr_test",
           "linf_test", "effective_signal", "power_from_eta"]


@dataclass
class TestReport:
    """Outcome of one goodness-of-fit evaluation.

    ``lam`` always satisfies ``lam = (2 * log_lr - n) / sqrt(2 n)``.
    ``reject``/``alpha`` stay unset until a decision rule is applied.
    ``threshold_info`` carries the sup-norm test's statistic and cutoff.
    """

    __test__ = False  # the name looks collectible to pytest

    s: int
    n: int
    log_lr: float
    lam: float
    p_value: float | None
    method: str = "LR"
    reject: bool | None = None
    alpha: float | None = None
    threshold_info: dict | None = None

    def __post_init__(self) -> None:
        expect = (2.0 * self.log_lr - self.n) / math.sqrt(2.0 * self.n)
        if self.lam != expect:
            raise ArgumentError("lambda does not match its defining identity")
        if self.p_value is not None and not 0.0 <= self.p_value <= 1.0:
            raise ArgumentError("p-value outside [0, 1]")

    def to_dict(self) -> dict:
        return {
            "s": self.s,
            "n": self.n,
            "log_lr": self.log_lr,
            "lambda": self.lam,
            "p_value": self.p_value,
            "method": self.method,
            "reject": self.reject,
            "alpha": self.alpha,
            "threshold_info": self.threshold_info,
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


@dataclass
class SignalReport:
    """Finite-n effective signal of an alternative, and the power it implies."""

    n: int
    s: int
    tau_hat: float
    eta_hat: float
    alpha: float
    predicted_power: float

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "s": self.s,
            "tau_hat": self.tau_hat,
            "eta_hat": self.eta_hat,
            "alpha": self.alpha,
            "predicted_power": self.predicted_power,
        }


def _lambda_of(log_lr: float, n: int) -> float:
    return (2.0 * log_lr - n) / math.sqrt(2.0 * n)


def _two_sided_p(lam: float) -> float:
    return 2.0 * (1.0 - normal_cdf(abs(lam)))


def lr_statistic(sample: LayerSample, gamma: np.ndarray, fit: FitResult) -> TestReport:
    """Log LR statistic and its normalized form, without a decision.

    The fitted point minimizes the objective, so the statistic is
    non-negative up to solver tolerance; tiny negative values (the null
    sitting within solver noise of the optimum) are clamped to zero with
    a warning rather than failing replicate pipelines.
    """
    if not fit.converged:
        raise NumericalError("refusing the LR statistic on a non-converged fit")
    gamma = np.asarray(gamma, dtype=float)
    n, s = sample.n, sample.s
    if gamma.shape != (n,):
        raise ArgumentError(f"gamma has shape {gamma.shape}, expected ({n},)")
    if not np.all(np.isfinite(gamma)):
        raise ArgumentError("gamma has non-finite entries")
    log_lr = neg_log_likelihood(gamma, sample) - neg_log_likelihood(fit.beta_hat, sample)
    if log_lr < 0.0:
        # Size of a legitimate undershoot: suboptimality of the fitted
        # point, ~ n * grad_inf^2 / lambda_min ~ grad_inf^2 * n^(2-s).
        eps_num = 1e-9 + 10.0 * fit.final_grad_norm ** 2 * float(n) ** (2 - s)
        if log_lr < -eps_num:
            raise NumericalError(
                f"log LR = {log_lr:.3e} below the numerical floor -{eps_num:.3e}; "
                "the fit is not at the optimum"
            )
        warnings.warn(
            f"clamping marginally negative log LR ({log_lr:.3e}) to zero",
            RuntimeWarning,
        )
        log_lr = 0.0
    lam = _lambda_of(log_lr, n)
    return TestReport(s=s, n=n, log_lr=log_lr, lam=lam, p_value=_two_sided_p(lam))


def lr_test(report: TestReport, alpha: float) -> TestReport:
    """Apply the two-sided normal decision rule at level ``alpha``.

    Rejection is strict: |lambda| exactly at the critical value does not
    reject.
    """
    if not 0.0 < alpha < 1.0:
        raise ArgumentError(f"alpha must lie in (0, 1), got {alpha}")
    z = normal_quantile(1.0 - alpha / 2.0)
    return replace(report, reject=bool(abs(report.lam) > z), alpha=alpha,
                   p_value=_two_sided_p(report.lam))


def linf_test(
    sample: LayerSample,
    gamma: np.ndarray,
    fit: FitResult,
    alpha: float = 0.05,
    calibration: float | str = "monte-carlo",
    calibration_replicates: int = 200,
    seed=0,
    fit_config: FitConfig = FitConfig(),
) -> TestReport:
    """Sup-norm goodness-of-fit test: reject when ||beta_hat - gamma||_inf is large.

    With a numeric ``calibration`` constant C the cutoff is the analytic
    form 2 C sqrt(log n / n^(s-1)).  The default calibrates the cutoff as
    the (1 - alpha) empirical quantile of the statistic over fresh null
    replicates, which buys an honest finite-sample size at the cost of the
    extra fits.
    """
    if not 0.0 < alpha < 1.0:
        raise ArgumentError(f"alpha must lie in (0, 1), got {alpha}")
    base = lr_statistic(sample, gamma, fit)
    gamma = np.asarray(gamma, dtype=float)
    n, s = sample.n, sample.s
    statistic = float(np.max(np.abs(fit.beta_hat - gamma)))
    info: dict = {"statistic": statistic}
    p_value: float | None = None
    if isinstance(calibration, (int, float)):
        c = float(calibration)
        if c <= 0:
            raise ArgumentError("analytic cutoff constant must be positive")
        cutoff = 2.0 * c * math.sqrt(math.log(n) / float(n) ** (s - 1))
        info.update(calibration="analytic", constant=c, cutoff=cutoff)
    elif calibration == "monte-carlo":
        if calibration_replicates < 1:
            raise ArgumentError("calibration needs at least one replicate")
        params = LayeredParams(n=n, r=max(2, s), layers={s: gamma})
        null_stats = []
        failures = 0
        for i in range(calibration_replicates):
            stream = substream(np.random.SeedSequence(int(seed)), i)
            null_sample = sample_layer(params, s, make_rng(stream))
            try:
                null_fit = fit_layer(null_sample, fit_config)
            except HyperbetaError:
                failures += 1
                continue
            if not null_fit.converged:
                failures += 1
                continue
            null_stats.append(float(np.max(np.abs(null_fit.beta_hat - gamma))))
        if failures:
            raise NumericalError(
                f"{failures} of {calibration_replicates} calibration replicates failed"
            )
        order = np.sort(null_stats)
        k = min(len(order) - 1, max(0, math.ceil((1.0 - alpha) * len(order)) - 1))
        cutoff = float(order[k])
        p_value = (1.0 + float(np.sum(order >= statistic))) / (len(order) + 1.0)
        info.update(calibration="monte-carlo", replicates=calibration_replicates,
                    failures=failures, cutoff=cutoff)
    else:
        raise ArgumentError(f"unknown calibration {calibration!r}")
    return replace(
        base,
        method="Linf",
        alpha=alpha,
        reject=bool(statistic >= cutoff),
        p_value=p_value,
        threshold_info=info,
    )


def power_from_eta(eta: float, alpha: float) -> float:
    """Two-sided rejection probability of |N(-eta/sqrt(2), 1)| at level alpha."""
    z = normal_quantile(1.0 - alpha / 2.0)
    m = eta / math.sqrt(2.0)
    return (1.0 - normal_cdf(z + m)) + normal_cdf(m - z)


def effective_signal(
    gamma: np.ndarray,
    gamma_prime: np.ndarray,
    n: int,
    s: int,
    alpha: float = 0.05,
) -> SignalReport:
    """Finite-n effective signal of testing gamma against gamma_prime.

    ``tau_hat`` scales the L2 separation by the detection-threshold rate
    n^((2s-3)/4); ``eta_hat`` is the degree-covariance quadratic form of
    the separation (at the null parameters) over sqrt(n).  The predicted
    power evaluates the normal limit at that finite-n signal.
    """
    gamma = np.asarray(gamma, dtype=float)
    gamma_prime = np.asarray(gamma_prime, dtype=float)
    if gamma.shape != (n,) or gamma_prime.shape != (n,):
        raise ArgumentError(f"both parameter vectors must have shape ({n},)")
    diff = gamma_prime - gamma
    tau_hat = float(n) ** ((2 * s - 3) / 4.0) * float(np.linalg.norm(diff))
    sigma = degree_covariance(gamma, n, s).sigma
    # positive semidefinite quadratic form; clamp float-level undershoot
    eta_hat = max(0.0, float(diff @ sigma @ diff) / math.sqrt(n))
    return SignalReport(
        n=n,
        s=s,
        tau_hat=tau_hat,
        eta_hat=eta_hat,
        alpha=alpha,
        predicted_power=power_from_eta(eta_hat, alpha),
    )
