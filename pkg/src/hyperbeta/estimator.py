"""Maximum-likelihood fitting, one layer at a time.

The solver is a damped fixed-point iteration on the moment equations
d_s(v) = E[d_s(v)].  Writing the expected degree as
e^{beta_v} * sum_{e'} e^{S'} / (1 + e^{beta_v + S'}) over the
(s-1)-subsets avoiding v, solving the v-th equation for beta_v gives the
update

    beta_v <- beta_v + log d_s(v) - log E[d_s(v)],

applied to all coordinates simultaneously and damped.  At s = 2 this is
exactly the classical graph beta-model iteration.  Safeguards: the
damping halves whenever a step increases the objective, and after a
configurable number of non-converged sweeps the solver switches to damped
Newton on the dense degree-covariance Hessian (positive definite for any
finite point, so the step is always well-posed).

The estimator is unconstrained.  A declared sup-norm bound is only used
to warn when the estimate escapes it; projecting would bias simulation
studies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ArgumentError, BoundaryDegreeError, HyperbetaError, LayerSample, max_degree
from .likelihood import LikelihoodWorkspace, degree_covariance

__all__ = ["FitConfig", "FitResult", "fit_layer", "fit_all_layers",
           "existence_diagnostic", "initial_beta"]

# Iterates beyond this sup-norm are treated as evidence that the MLE is
# escaping to the boundary of the parameter space.
SUSPECT_SUP_NORM = 30.0


@dataclass(frozen=True)
class FitConfig:
    """Solver knobs.

    ``tol_grad`` is relative: the stopping rule is
    ``max_v |E[d_s(v)] - d_s(v)| <= tol_grad * n^(s-1)``, because
    gradients scale with expected degrees ~ n^(s-1).
    """

    tol_grad: float = 1e-8
    max_iters: int = 500
    damping: float = 1.0
    newton_switch_iters: int = 200
    bound_M: float | None = None

    def __post_init__(self) -> None:
        if not self.tol_grad > 0:
            raise ArgumentError("tol_grad must be positive")
        if not 0 < self.damping <= 1:
            raise ArgumentError("damping must lie in (0, 1]")
        if self.max_iters < 1:
            raise ArgumentError("max_iters must be at least 1")
        if self.newton_switch_iters < 0:
            raise ArgumentError("newton_switch_iters must be non-negative")


@dataclass
class FitResult:
    """Fitted layer parameters with convergence metadata.

    ``stderr_diag`` (the reciprocal plug-in degree standard deviations)
    starts empty and is filled by the inference module.
    """

    beta_hat: np.ndarray
    converged: bool
    iters: int
    final_grad_norm: float
    method_used: str
    n: int
    s: int
    existence_warning: str | None = None
    stderr_diag: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "s": self.s,
            "beta_hat": [float(b) for b in self.beta_hat],
            "converged": bool(self.converged),
            "iters": int(self.iters),
            "final_grad_norm": float(self.final_grad_norm),
            "method_used": self.method_used,
            "existence_warning": self.existence_warning,
            "stderr_diag": None if self.stderr_diag is None
            else [float(x) for x in self.stderr_diag],
        }


def initial_beta(sample: LayerSample) -> np.ndarray:
    """Starting point: per-coordinate logit of the clamped degree fraction.

    Exact at symmetric data (it is one step of the fixed-point logic with
    all other coordinates ignored).
    """
    cmax = max_degree(sample.n, sample.s)
    eps = 1.0 / (2.0 * cmax)
    frac = np.clip(sample.degrees / cmax, eps, 1.0 - eps)
    return (np.log(frac) - np.log1p(-frac)) / sample.s


def _grad_tolerance(config: FitConfig, n: int, s: int) -> float:
    return config.tol_grad * float(n) ** (s - 1)


def fit_layer(sample: LayerSample, config: FitConfig = FitConfig()) -> FitResult:
    """Fit one layer's parameters by safeguarded fixed-point iteration.

    Raises :class:`BoundaryDegreeError` when a degree is 0 or maximal (the
    moment equations then have no interior solution candidate).  Running
    out of iterations returns a non-converged result, not an exception.
    """
    n, s = sample.n, sample.s
    if n <= s:
        raise ArgumentError(f"fitting needs n > s, got n={n}, s={s}")
    d = sample.degrees.astype(float)
    cmax = max_degree(n, s)
    if np.any(sample.degrees == 0) or np.any(sample.degrees == cmax):
        raise BoundaryDegreeError(
            "degree sequence touches 0 or the maximum "
            f"C({n - 1},{s - 1}) = {cmax}; the MLE may not exist"
        )

    ws = LikelihoodWorkspace(sample)
    tol = _grad_tolerance(config, n, s)
    beta = initial_beta(sample)
    nll = ws.neg_log_likelihood(beta)
    expected = ws.expected_degrees(beta)
    damping = config.damping
    used_fp = used_newton = False
    suspect = float(np.max(np.abs(beta))) > SUSPECT_SUP_NORM
    grad_inf = float(np.max(np.abs(expected - d)))
    iters = 0

    while grad_inf > tol and iters < config.max_iters:
        iters += 1
        # Accepting up to float-level noise keeps the damping from
        # collapsing on rounding jitter near the optimum.
        slack = 1e-12 * (1.0 + abs(nll))
        if iters <= config.newton_switch_iters:
            used_fp = True
            step = np.log(d) - np.log(expected)
            accepted = False
            for _ in range(60):
                cand = beta + damping * step
                nll_cand = ws.neg_log_likelihood(cand)
                if nll_cand <= nll + slack:
                    accepted = True
                    break
                damping *= 0.5
            if not accepted:
                break
        else:
            used_newton = True
            hess = degree_covariance(beta, n, s).sigma
            try:
                delta = np.linalg.solve(hess, d - expected)
            except np.linalg.LinAlgError:
                break
            t = 1.0
            accepted = False
            for _ in range(60):
                cand = beta + t * delta
                nll_cand = ws.neg_log_likelihood(cand)
                if nll_cand <= nll + slack:
                    accepted = True
                    break
                t *= 0.5
            if not accepted:
                break
        beta = cand
        nll = nll_cand
        expected = ws.expected_degrees(beta)
        grad_inf = float(np.max(np.abs(expected - d)))
        if float(np.max(np.abs(beta))) > SUSPECT_SUP_NORM:
            suspect = True

    converged = grad_inf <= tol
    warnings: list[str] = []
    if suspect:
        warnings.append(
            f"iterates exceeded sup-norm {SUSPECT_SUP_NORM}; the MLE may not "
            "exist (degree sequence near the polytope boundary)"
        )
    if config.bound_M is not None and float(np.max(np.abs(beta))) > config.bound_M:
        warnings.append(f"estimate exceeds declared bound {config.bound_M}")
    if used_newton and used_fp:
        method = "hybrid"
    elif used_newton:
        method = "newton"
    else:
        method = "fixed-point"
    return FitResult(
        beta_hat=beta,
        converged=converged,
        iters=iters,
        final_grad_norm=grad_inf,
        method_used=method,
        n=n,
        s=s,
        existence_warning="; ".join(warnings) if warnings else None,
    )


def fit_all_layers(
    samples: dict[int, LayerSample],
    config: FitConfig = FitConfig(),
) -> dict[int, FitResult | HyperbetaError]:
    """Fit every layer independently; one layer's failure never aborts another.

    Failed layers map to the raised error instance instead of a result.
    """
    out: dict[int, FitResult | HyperbetaError] = {}
    for s in sorted(samples):
        try:
            out[s] = fit_layer(samples[s], config)
        except HyperbetaError as exc:
            out[s] = exc
    return out


def existence_diagnostic(sample: LayerSample, config: FitConfig = FitConfig()) -> str:
    """Practical MLE-existence probe: 'boundary', 'suspect', or 'interior'.

    'boundary' flags degrees at 0 or the maximum; 'suspect' flags
    fixed-point iterates escaping past sup-norm 30 before convergence.
    The exact degree-polytope test is out of scope.
    """
    cmax = max_degree(sample.n, sample.s)
    if np.any(sample.degrees == 0) or np.any(sample.degrees == cmax):
        return "boundary"
    probe = FitConfig(
        tol_grad=config.tol_grad,
        max_iters=min(config.max_iters, 200),
        damping=config.damping,
        newton_switch_iters=config.newton_switch_iters,
        bound_M=None,
    )
    result = fit_layer(sample, probe)
    if result.existence_warning and "sup-norm" in result.existence_warning:
        return "suspect"
    return "interior"
