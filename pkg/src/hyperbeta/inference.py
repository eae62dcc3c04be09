"""Plug-in standard errors, CLT standardization, and joint confidence sets.

Standardizing coordinate v of a fitted layer means multiplying the
estimation error by the degree standard deviation sigma_s(v) (the
estimate's asymptotic precision is the reciprocal of that scale).  Joint
confidence sets for any finite collection of coordinates across layers
compare the plug-in-weighted squared-error quadratic form against a
chi-squared quantile; singleton queries also get the familiar
``estimate +/- z / sigma_hat`` interval.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

from .core import (
    ArgumentError,
    LayeredParams,
    NumericalError,
    chisq_quantile,
    logistic,
    normal_quantile,
    subset_index_array,
)
from .estimator import FitResult
from .likelihood import edge_sums

__all__ = ["plugin_sigma", "attach_stderr", "standardize",
           "ConfidenceReport", "confidence_set", "intervals_to_csv"]


def plugin_sigma(beta_hat: np.ndarray, n: int, s: int) -> np.ndarray:
    """Plug-in degree standard deviations sigma_hat_s(v) at ``beta_hat``.

    sigma_hat^2(v) streams psi*(1-psi) over the edges containing v;
    strictly positive for any finite parameter vector.
    """
    beta = np.asarray(beta_hat, dtype=float)
    if beta.shape != (n,):
        raise ArgumentError(f"beta_hat has shape {beta.shape}, expected ({n},)")
    idx = subset_index_array(n, s)
    p = logistic(edge_sums(beta, idx))
    w = p * (1.0 - p)
    var = np.zeros(n)
    for j in range(s):
        var += np.bincount(idx[:, j], weights=w, minlength=n)
    return np.sqrt(var)


def attach_stderr(fit: FitResult) -> FitResult:
    """Fill ``fit.stderr_diag`` with reciprocal plug-in sigmas, in place."""
    sigma = plugin_sigma(fit.beta_hat, fit.n, fit.s)
    fit.stderr_diag = 1.0 / sigma
    return fit


def standardize(
    fit: FitResult,
    true_beta: np.ndarray,
    n: int,
    s: int,
    mode: str = "plugin",
) -> np.ndarray:
    """Coordinatewise sigma_s(v) * (beta_hat_v - beta_v).

    ``mode='plugin'`` (default, what a practitioner has) evaluates sigma
    at the estimate; ``mode='oracle'`` evaluates it at the true
    parameters, matching the limit theorem's literal standardization for
    QQ studies.
    """
    if not fit.converged:
        raise NumericalError("refusing to standardize a non-converged fit")
    true_beta = np.asarray(true_beta, dtype=float)
    if true_beta.shape != (n,):
        raise ArgumentError(f"true beta has shape {true_beta.shape}, expected ({n},)")
    if mode == "plugin":
        sigma = plugin_sigma(fit.beta_hat, n, s)
    elif mode == "oracle":
        sigma = plugin_sigma(true_beta, n, s)
    else:
        raise ArgumentError(f"unknown standardization mode {mode!r}")
    return sigma * (fit.beta_hat - true_beta)


@dataclass
class ConfidenceReport:
    """Joint confidence-set evaluation plus per-coordinate intervals.

    ``statistic`` and ``covered`` are populated only when true parameters
    were supplied (simulation use); the intervals and threshold never
    depend on the truth.
    """

    layer_indices: dict[int, list[int]]
    alpha: float
    threshold: float
    statistic: float | None = None
    covered: bool | None = None
    intervals: list[tuple[int, int, float, float, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "layer_indices": {str(s): list(v) for s, v in self.layer_indices.items()},
            "alpha": self.alpha,
            "threshold": self.threshold,
            "statistic": self.statistic,
            "covered": self.covered,
            "intervals": [
                {"layer": s, "vertex": v, "estimate": est, "low": lo, "high": hi}
                for (s, v, est, lo, hi) in self.intervals
            ],
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def confidence_set(
    fits: dict[int, FitResult],
    queries: dict[int, list[int]],
    alpha: float = 0.05,
    true_params: LayeredParams | None = None,
) -> ConfidenceReport:
    """Chi-squared confidence set for the queried coordinates.

    The statistic sums sigma_hat^2(v) * (beta_hat_v - beta_v)^2 over the
    queried coordinates of every layer; it is covered when it does not
    exceed the chi-squared quantile with one degree of freedom per
    coordinate.  Every queried coordinate also gets its singleton
    interval ``beta_hat_v +/- z_(alpha/2) / sigma_hat(v)``.
    """
    if not 0 < alpha < 1:
        raise ArgumentError(f"alpha must lie in (0, 1), got {alpha}")
    total = sum(len(v) for v in queries.values())
    if total < 1:
        raise ArgumentError("at least one queried coordinate required")
    z = normal_quantile(1.0 - alpha / 2.0)
    threshold = chisq_quantile(1.0 - alpha, total)
    statistic = 0.0 if true_params is not None else None
    intervals: list[tuple[int, int, float, float, float]] = []
    for s in sorted(queries):
        if s not in fits:
            raise ArgumentError(f"no fit supplied for layer {s}")
        fit = fits[s]
        if not fit.converged:
            raise NumericalError(f"layer {s} fit did not converge")
        verts = list(queries[s])
        if any(not 0 <= v < fit.n for v in verts):
            raise ArgumentError(f"layer {s} query has vertices outside [0, {fit.n})")
        sigma = plugin_sigma(fit.beta_hat, fit.n, fit.s)
        for v in verts:
            est = float(fit.beta_hat[v])
            half = z / float(sigma[v])
            intervals.append((s, v, est, est - half, est + half))
            if true_params is not None:
                err = est - float(true_params.layer(s)[v])
                statistic += float(sigma[v]) ** 2 * err * err
    covered = None if statistic is None else bool(statistic <= threshold)
    return ConfidenceReport(
        layer_indices={s: list(v) for s, v in queries.items()},
        alpha=alpha,
        threshold=threshold,
        statistic=statistic,
        covered=covered,
        intervals=intervals,
    )


def intervals_to_csv(report: ConfidenceReport) -> str:
    """Interval table as CSV ``layer,vertex,estimate,low,high``."""
    buf = io.StringIO()
    buf.write("layer,vertex,estimate,low,high\n")
    for (s, v, est, lo, hi) in report.intervals:
        buf.write(f"{s},{v},{est!r},{lo!r},{hi!r}\n")
    return buf.getvalue()
