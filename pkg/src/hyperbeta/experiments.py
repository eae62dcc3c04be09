"""Scripted Monte Carlo studies emitting plot-ready tables.

Six study kinds: ``qq`` (standardized-estimate quantiles against the
normal), ``coverage`` (singleton confidence intervals), ``power`` (LR
rejection rates over a signal grid, against the normal-limit
prediction), ``rate`` (scaled estimation-error medians over an n grid),
``gamma_gap`` (diagonal-surrogate quality over an n grid), and
``null_calibration`` (size and moments of the normalized LR statistic).

Every study is bit-reproducible from (spec, master_seed): replicate i
draws from a stream derived purely from the pair, results are aggregated
in replicate order, and the CSV formatting round-trips floats exactly.
Replicates run in parallel across processes when ``workers != 1``;
failed replicates are excluded, counted, and fatal above a share
threshold.
"""

from __future__ import annotations

import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import (
    ArgumentError,
    ExperimentError,
    HyperbetaError,
    LayerSample,
    LayeredParams,
    derive_stream_seed,
    make_rng,
    normal_quantile,
    substream,
)
from .estimator import FitConfig, FitResult, fit_layer
from .goftest import lr_statistic, lr_test, power_from_eta
from .inference import plugin_sigma, standardize
from .likelihood import gamma_inverse_gap
from .sampler import sample_layer

__all__ = [
    "ExperimentSpec",
    "QQResult",
    "CoverageResult",
    "PowerResult",
    "RateResult",
    "GammaGapResult",
    "NullCalibrationResult",
    "run_qq",
    "run_coverage",
    "run_power",
    "run_rate",
    "run_gamma_gap",
    "run_null_calibration",
    "run_experiment",
    "render_figure",
]

KINDS = ("qq", "coverage", "power", "rate", "gamma_gap", "null_calibration")


@dataclass(frozen=True)
class ExperimentSpec:
    """Declarative description of one Monte Carlo study.

    ``s`` is a single layer size except for ``power``, which sweeps a
    tuple of sizes over ``signal_grid``.  ``beta_const`` sets the common
    value of the true (null) parameters.  ``workers=None`` uses the
    available parallelism; 1 forces serial execution.
    """

    kind: str
    n: int | None = None
    s: int | tuple[int, ...] = 3
    replicates: int = 200
    master_seed: int = 1729
    alpha: float = 0.05
    beta_const: float = 0.0
    signal_grid: tuple[float, ...] | None = None
    n_grid: tuple[int, ...] | None = None
    coordinate: int = 0
    sigma_mode: str = "plugin"
    fresh_direction: bool = True
    workers: int | None = None
    max_failure_share: float = 0.05
    fit: FitConfig = field(default_factory=FitConfig)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ArgumentError(f"unknown experiment kind {self.kind!r}")
        if self.replicates < 1:
            raise ArgumentError("replicates must be at least 1")
        if not 0 < self.alpha < 1:
            raise ArgumentError("alpha must lie in (0, 1)")
        if self.kind == "power" and not self.signal_grid:
            raise ArgumentError("power study needs a non-empty signal grid")
        if self.kind in ("rate", "gamma_gap") and not self.n_grid:
            raise ArgumentError(f"{self.kind} study needs an n grid")
        if self.signal_grid is not None:
            object.__setattr__(self, "signal_grid", tuple(float(a) for a in self.signal_grid))
        if self.n_grid is not None:
            object.__setattr__(self, "n_grid", tuple(int(v) for v in self.n_grid))
        if isinstance(self.s, (list, tuple)):
            object.__setattr__(self, "s", tuple(int(v) for v in self.s))


def _single_layer_size(spec: ExperimentSpec) -> int:
    if isinstance(spec.s, tuple):
        if len(spec.s) != 1:
            raise ArgumentError(f"{spec.kind} study takes a single layer size")
        return spec.s[0]
    return int(spec.s)


def _layer_sizes(spec: ExperimentSpec) -> tuple[int, ...]:
    return spec.s if isinstance(spec.s, tuple) else (int(spec.s),)


# ----------------------------------------------------------------------
# Replicate execution
# ----------------------------------------------------------------------

def _map_replicates(worker, payloads: list, workers: int | None) -> list:
    """Run ``worker`` over payloads, in order, optionally across processes."""
    if workers is None:
        workers = os.cpu_count() or 1
    workers = max(1, min(workers, len(payloads)))
    if workers == 1 or len(payloads) < 4:
        return [worker(p) for p in payloads]
    chunk = max(1, len(payloads) // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, payloads, chunksize=chunk))


def _fit_sampled_layer(
    n: int, s: int, beta: np.ndarray, stream, fit_config: FitConfig
) -> tuple[LayerSample, FitResult] | None:
    """Sample one layer under ``beta`` and fit it; None on any failure."""
    params = LayeredParams(n=n, r=max(2, s), layers={s: beta})
    sample = sample_layer(params, s, make_rng(stream))
    try:
        fit = fit_layer(sample, fit_config)
    except HyperbetaError:
        return None
    if not fit.converged:
        return None
    return sample, fit


def _check_failures(excluded: int, total: int, spec: ExperimentSpec) -> None:
    if excluded > spec.max_failure_share * total:
        raise ExperimentError(
            f"{excluded} of {total} replicates failed "
            f"(> {spec.max_failure_share:.0%} allowed)"
        )


def _sphere_direction(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniform direction on the unit sphere via Box-Muller normals."""
    m = (n + 1) // 2
    u1 = rng.random(m)
    u2 = rng.random(m)
    radius = np.sqrt(-2.0 * np.log1p(-u1))
    angle = 2.0 * math.pi * u2
    z = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])[:n]
    return z / np.linalg.norm(z)


def _fmt_row(values) -> str:
    parts = []
    for v in values:
        if isinstance(v, (bool, np.bool_)):
            parts.append("1" if v else "0")
        elif isinstance(v, (int, np.integer)):
            parts.append(str(int(v)))
        else:
            parts.append(repr(float(v)))
    return ",".join(parts)


def _csv(header: str, rows) -> str:
    buf = io.StringIO()
    buf.write(header + "\n")
    for row in rows:
        buf.write(_fmt_row(row) + "\n")
    return buf.getvalue()


# ----------------------------------------------------------------------
# QQ study
# ----------------------------------------------------------------------

def _qq_worker(payload) -> float | None:
    n, s, beta_const, seed, i, coordinate, sigma_mode, fit_config = payload
    beta = np.full(n, beta_const)
    got = _fit_sampled_layer(n, s, beta, derive_stream_seed(seed, i), fit_config)
    if got is None:
        return None
    _, fit = got
    z = standardize(fit, beta, n, s, mode=sigma_mode)
    return float(z[coordinate])


@dataclass
class QQResult:
    spec: ExperimentSpec
    rows: list[tuple[float, float, float]]
    completed: int
    excluded: int
    ks_distance: float

    header = "position,empirical,normal"

    def to_csv(self) -> str:
        return _csv(self.header, self.rows)


def _ks_against_normal(sorted_values: np.ndarray) -> float:
    from .core import normal_cdf

    r = len(sorted_values)
    cdf = np.array([normal_cdf(v) for v in sorted_values])
    upper = np.max(np.arange(1, r + 1) / r - cdf)
    lower = np.max(cdf - np.arange(0, r) / r)
    return float(max(upper, lower))


def run_qq(spec: ExperimentSpec) -> QQResult:
    """Standardized first-coordinate estimates vs normal quantiles.

    Sorted standardized values are paired with normal quantiles at the
    plotting positions (i - 0.5) / R over completed replicates.
    """
    if spec.kind != "qq":
        raise ArgumentError("spec kind must be 'qq'")
    s = _single_layer_size(spec)
    payloads = [
        (spec.n, s, spec.beta_const, spec.master_seed, i, spec.coordinate,
         spec.sigma_mode, spec.fit)
        for i in range(spec.replicates)
    ]
    values = _map_replicates(_qq_worker, payloads, spec.workers)
    kept = np.array([v for v in values if v is not None])
    excluded = spec.replicates - len(kept)
    _check_failures(excluded, spec.replicates, spec)
    kept.sort()
    r = len(kept)
    rows = [
        ((i + 0.5) / r, float(kept[i]), normal_quantile((i + 0.5) / r))
        for i in range(r)
    ]
    return QQResult(spec=spec, rows=rows, completed=r, excluded=excluded,
                    ks_distance=_ks_against_normal(kept))


# ----------------------------------------------------------------------
# Coverage study
# ----------------------------------------------------------------------

def _coverage_worker(payload) -> tuple[float, float, float] | None:
    n, s, beta_const, seed, i, coordinate, fit_config = payload
    beta = np.full(n, beta_const)
    got = _fit_sampled_layer(n, s, beta, derive_stream_seed(seed, i), fit_config)
    if got is None:
        return None
    _, fit = got
    sigma = plugin_sigma(fit.beta_hat, n, s)
    est = float(fit.beta_hat[coordinate])
    return est, float(sigma[coordinate]), beta_const


@dataclass
class CoverageResult:
    spec: ExperimentSpec
    rows: list[tuple[int, float, float, float, bool]]
    coverage: float
    completed: int
    excluded: int
    true_value: float

    header = "replicate,estimate,low,high,covered"

    def to_csv(self) -> str:
        return _csv(self.header, self.rows)


def run_coverage(spec: ExperimentSpec) -> CoverageResult:
    """Empirical coverage of the singleton interval for one coordinate."""
    if spec.kind != "coverage":
        raise ArgumentError("spec kind must be 'coverage'")
    s = _single_layer_size(spec)
    z = normal_quantile(1.0 - spec.alpha / 2.0)
    payloads = [
        (spec.n, s, spec.beta_const, spec.master_seed, i, spec.coordinate, spec.fit)
        for i in range(spec.replicates)
    ]
    outcomes = _map_replicates(_coverage_worker, payloads, spec.workers)
    rows: list[tuple[int, float, float, float, bool]] = []
    hits = 0
    for i, out in enumerate(outcomes):
        if out is None:
            continue
        est, sigma, truth = out
        lo, hi = est - z / sigma, est + z / sigma
        covered = lo <= truth <= hi
        hits += covered
        rows.append((i, est, lo, hi, covered))
    excluded = spec.replicates - len(rows)
    _check_failures(excluded, spec.replicates, spec)
    return CoverageResult(
        spec=spec,
        rows=rows,
        coverage=hits / len(rows),
        completed=len(rows),
        excluded=excluded,
        true_value=spec.beta_const,
    )


# ----------------------------------------------------------------------
# Power study
# ----------------------------------------------------------------------

def _power_worker(payload) -> bool | None:
    n, s, beta_const, seed, i, a, a_idx, alpha, fresh, fit_config = payload
    gamma = np.full(n, beta_const)
    cell = substream(substream(derive_stream_seed(seed, i), s), a_idx)
    rng = make_rng(cell)
    if fresh:
        direction = _sphere_direction(rng, n)
    else:
        direction = _sphere_direction(
            make_rng(substream(substream(derive_stream_seed(seed, 1 << 30), s), a_idx)), n
        )
    got = _fit_sampled_layer(n, s, gamma + a * direction, rng, fit_config)
    if got is None:
        return None
    sample, fit = got
    report = lr_test(lr_statistic(sample, gamma, fit), alpha)
    return bool(report.reject)


@dataclass
class PowerResult:
    spec: ExperimentSpec
    rows: list[tuple[float, int, int, int, float, float]]
    excluded: int

    header = "alpha_signal,s,n,replicates,empirical_power,predicted_power"

    def to_csv(self) -> str:
        return _csv(self.header, self.rows)

    def curve(self, s: int) -> list[tuple[float, float]]:
        return [(a, emp) for (a, ss, _, _, emp, _) in self.rows if ss == s]


def run_power(spec: ExperimentSpec) -> PowerResult:
    """Empirical LR power over a signal grid, per layer size.

    Each replicate draws a uniform sphere direction u (redrawn per
    replicate by default), samples under gamma + a * u, fits, and tests
    against the null gamma.  The prediction column evaluates the normal
    limit at the direction-averaged effective signal
    a^2 * tr(Sigma(gamma)) / (n sqrt(n)).
    """
    if spec.kind != "power":
        raise ArgumentError("spec kind must be 'power'")
    n = spec.n
    rows = []
    total_excluded = 0
    for s in _layer_sizes(spec):
        gamma = np.full(n, spec.beta_const)
        mean_var = float(np.mean(plugin_sigma(gamma, n, s) ** 2))
        for a_idx, a in enumerate(spec.signal_grid):
            payloads = [
                (n, s, spec.beta_const, spec.master_seed, i, a, a_idx,
                 spec.alpha, spec.fresh_direction, spec.fit)
                for i in range(spec.replicates)
            ]
            outcomes = _map_replicates(_power_worker, payloads, spec.workers)
            kept = [o for o in outcomes if o is not None]
            excluded = spec.replicates - len(kept)
            total_excluded += excluded
            _check_failures(excluded, spec.replicates, spec)
            eta = a * a * mean_var / math.sqrt(n)
            rows.append((
                float(a), s, n, len(kept),
                sum(kept) / len(kept),
                power_from_eta(eta, spec.alpha),
            ))
    return PowerResult(spec=spec, rows=rows, excluded=total_excluded)


# ----------------------------------------------------------------------
# Rate study
# ----------------------------------------------------------------------

def _rate_worker(payload) -> tuple[float, float] | None:
    n, s, beta_const, seed, i, fit_config = payload
    beta = np.full(n, beta_const)
    got = _fit_sampled_layer(n, s, beta, derive_stream_seed(seed, i), fit_config)
    if got is None:
        return None
    _, fit = got
    err = fit.beta_hat - beta
    return float(np.max(np.abs(err))), float(np.linalg.norm(err))


@dataclass
class RateResult:
    spec: ExperimentSpec
    rows: list[tuple[int, float, float, float, float]]
    excluded: int

    header = "n,median_linf,median_l2,scaled_linf,scaled_l2"

    def to_csv(self) -> str:
        return _csv(self.header, self.rows)


def run_rate(spec: ExperimentSpec) -> RateResult:
    """Median estimation errors over an n grid, raw and rate-scaled.

    The sup-norm median is scaled by sqrt(n^(s-1) / log n) and the L2
    median by sqrt(n^(s-2)); both sequences are bounded when the
    estimator converges at the theoretical rates.
    """
    if spec.kind != "rate":
        raise ArgumentError("spec kind must be 'rate'")
    s = _single_layer_size(spec)
    rows = []
    total_excluded = 0
    for n in spec.n_grid:
        payloads = [
            (n, s, spec.beta_const, spec.master_seed, i, spec.fit)
            for i in range(spec.replicates)
        ]
        outcomes = _map_replicates(_rate_worker, payloads, spec.workers)
        kept = [o for o in outcomes if o is not None]
        excluded = spec.replicates - len(kept)
        total_excluded += excluded
        _check_failures(excluded, spec.replicates, spec)
        m_inf = float(np.median([k[0] for k in kept]))
        m_l2 = float(np.median([k[1] for k in kept]))
        rows.append((
            n, m_inf, m_l2,
            m_inf * math.sqrt(float(n) ** (s - 1) / math.log(n)),
            m_l2 * math.sqrt(float(n) ** (s - 2)),
        ))
    return RateResult(spec=spec, rows=rows, excluded=total_excluded)


# ----------------------------------------------------------------------
# Gamma gap study
# ----------------------------------------------------------------------

@dataclass
class GammaGapResult:
    spec: ExperimentSpec
    rows: list[tuple[int, float]]

    header = "n,gap"

    def to_csv(self) -> str:
        return _csv(self.header, self.rows)


def run_gamma_gap(spec: ExperimentSpec) -> GammaGapResult:
    """Max-norm gap between the diagonal surrogate and the true inverse."""
    if spec.kind != "gamma_gap":
        raise ArgumentError("spec kind must be 'gamma_gap'")
    s = _single_layer_size(spec)
    rows = [
        (n, gamma_inverse_gap(np.full(n, spec.beta_const), n, s))
        for n in spec.n_grid
    ]
    return GammaGapResult(spec=spec, rows=rows)


# ----------------------------------------------------------------------
# Null calibration study
# ----------------------------------------------------------------------

def _null_worker(payload) -> tuple[float, float, bool] | None:
    n, s, beta_const, seed, i, alpha, fit_config = payload
    gamma = np.full(n, beta_const)
    got = _fit_sampled_layer(n, s, gamma, derive_stream_seed(seed, i), fit_config)
    if got is None:
        return None
    sample, fit = got
    report = lr_test(lr_statistic(sample, gamma, fit), alpha)
    return report.log_lr, report.lam, bool(report.reject)


@dataclass
class NullCalibrationResult:
    spec: ExperimentSpec
    rows: list[tuple[int, float, float, bool]]
    mean_lambda: float
    var_lambda: float
    size: float
    completed: int
    excluded: int

    header = "replicate,log_lr,lambda,reject"

    def to_csv(self) -> str:
        return _csv(self.header, self.rows)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([row[2] for row in self.rows])


def run_null_calibration(spec: ExperimentSpec) -> NullCalibrationResult:
    """Distribution of the normalized LR statistic under the null."""
    if spec.kind != "null_calibration":
        raise ArgumentError("spec kind must be 'null_calibration'")
    s = _single_layer_size(spec)
    payloads = [
        (spec.n, s, spec.beta_const, spec.master_seed, i, spec.alpha, spec.fit)
        for i in range(spec.replicates)
    ]
    outcomes = _map_replicates(_null_worker, payloads, spec.workers)
    rows = [
        (i, out[0], out[1], out[2])
        for i, out in enumerate(outcomes)
        if out is not None
    ]
    excluded = spec.replicates - len(rows)
    _check_failures(excluded, spec.replicates, spec)
    lams = np.array([r[2] for r in rows])
    rejects = np.array([r[3] for r in rows])
    return NullCalibrationResult(
        spec=spec,
        rows=rows,
        mean_lambda=float(np.mean(lams)),
        var_lambda=float(np.var(lams, ddof=1)),
        size=float(np.mean(rejects)),
        completed=len(rows),
        excluded=excluded,
    )


_RUNNERS = {
    "qq": run_qq,
    "coverage": run_coverage,
    "power": run_power,
    "rate": run_rate,
    "gamma_gap": run_gamma_gap,
    "null_calibration": run_null_calibration,
}


def run_experiment(spec: ExperimentSpec):
    """Dispatch a spec to its study runner."""
    return _RUNNERS[spec.kind](spec)


# ----------------------------------------------------------------------
# Figure rendering
# ----------------------------------------------------------------------

def render_figure(result, path: str) -> None:
    """Render one study's table to a figure file next to its CSV.

    Pure emission through the Agg backend; the format follows the file
    extension (SVG by default in the CLI).  Figures are diagnostic
    companions to the CSV, not publication graphics.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "hyperbeta"
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    if isinstance(result, QQResult):
        emp = [r[1] for r in result.rows]
        ref = [r[2] for r in result.rows]
        ax.plot(ref, emp, ".", ms=4)
        lim = [min(ref + emp), max(ref + emp)]
        ax.plot(lim, lim, "-", lw=0.8, color="gray")
        ax.set_xlabel("normal quantile")
        ax.set_ylabel("empirical quantile")
        ax.set_title(f"qq: n={result.spec.n}, s={_single_layer_size(result.spec)}, "
                     f"KS={result.ks_distance:.3f}")
    elif isinstance(result, CoverageResult):
        for (i, est, lo, hi, cov) in result.rows:
            ax.plot([i, i], [lo, hi], color="tab:blue" if cov else "tab:red", lw=1.0)
        ax.axhline(result.true_value, color="black", lw=0.8)
        ax.set_xlabel("replicate")
        ax.set_ylabel("interval")
        ax.set_title(f"coverage {result.coverage:.3f} at alpha={result.spec.alpha}")
    elif isinstance(result, PowerResult):
        for s in sorted({row[1] for row in result.rows}):
            pts = [(a, emp, pred) for (a, ss, _, _, emp, pred) in result.rows if ss == s]
            ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-", label=f"s={s}")
            ax.plot([p[0] for p in pts], [p[2] for p in pts], "--", lw=0.8,
                    label=f"s={s} predicted")
        ax.axhline(result.spec.alpha, color="gray", lw=0.8)
        ax.set_xlabel("signal magnitude")
        ax.set_ylabel("rejection rate")
        ax.legend()
    elif isinstance(result, RateResult):
        ns = [r[0] for r in result.rows]
        ax.loglog(ns, [r[1] for r in result.rows], "o-", label="median sup-norm error")
        ax.loglog(ns, [r[2] for r in result.rows], "s-", label="median L2 error")
        ax.set_xlabel("n")
        ax.legend()
    elif isinstance(result, GammaGapResult):
        ax.loglog([r[0] for r in result.rows], [r[1] for r in result.rows], "o-")
        ax.set_xlabel("n")
        ax.set_ylabel("max-norm gap")
    elif isinstance(result, NullCalibrationResult):
        lams = result.lambdas
        ax.hist(lams, bins=24, density=True, alpha=0.6)
        grid = np.linspace(-4, 4, 200)
        ax.plot(grid, np.exp(-grid ** 2 / 2) / math.sqrt(2 * math.pi), "-", lw=1.0)
        ax.set_xlabel("normalized LR statistic")
        ax.set_title(f"size={result.size:.3f}, mean={result.mean_lambda:.3f}, "
                     f"var={result.var_lambda:.3f}")
    else:
        raise ArgumentError(f"no renderer for {type(result).__name__}")
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None} if path.endswith(".svg") else None)
    plt.close(fig)
