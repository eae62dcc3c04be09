"""Layer negative log-likelihood, its derivatives, and covariance diagnostics.

The layer-s negative log-likelihood is

    l(beta) = sum_edges log(1 + exp(S_e)) - sum_v beta_v * d_s(v),

with S_e the sum of beta over the edge's vertices.  Its gradient at
coordinate v is the expected-minus-observed degree, and its Hessian is
the degree covariance matrix: entry (u, v) sums psi*(1-psi) over edges
containing both u and v.  The diagonal surrogate (reciprocal degree
variances) approximates the inverse covariance to O(n^-s); the gap
diagnostic measures that approximation directly.

All evaluations stream over the cached edge-index array; memory is the
dense n x n matrix plus O(C(n, s)) per-edge scratch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    ArgumentError,
    DegreeCovariance,
    LayerSample,
    NumericalError,
    log1p_exp,
    logistic,
    max_degree,
    subset_index_array,
)

__all__ = [
    "edge_sums",
    "expected_degrees",
    "neg_log_likelihood",
    "gradient",
    "degree_covariance",
    "gamma_surrogate",
    "gamma_inverse_gap",
    "hessian_eigen_bounds",
    "LikelihoodWorkspace",
]


def _check_beta(beta: np.ndarray, n: int) -> np.ndarray:
    vec = np.asarray(beta, dtype=float)
    if vec.shape != (n,):
        raise ArgumentError(f"beta has shape {vec.shape}, expected ({n},)")
    if not np.all(np.isfinite(vec)):
        raise ArgumentError("beta has non-finite entries")
    return vec


def edge_sums(beta: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Per-edge parameter sums S_e for every row of the index array."""
    total = beta[idx[:, 0]].astype(float, copy=True)
    for j in range(1, idx.shape[1]):
        total += beta[idx[:, j]]
    return total


def expected_degrees(beta: np.ndarray, n: int, s: int) -> np.ndarray:
    """Model-expected degree of every vertex at the given parameters."""
    beta = _check_beta(beta, n)
    idx = subset_index_array(n, s)
    p = logistic(edge_sums(beta, idx))
    out = np.zeros(n)
    for j in range(s):
        out += np.bincount(idx[:, j], weights=p, minlength=n)
    return out


def neg_log_likelihood(beta: np.ndarray, sample: LayerSample) -> float:
    """Negative log-likelihood of one layer at ``beta``."""
    beta = _check_beta(beta, sample.n)
    idx = subset_index_array(sample.n, sample.s)
    return float(np.sum(log1p_exp(edge_sums(beta, idx)))
                 - beta @ sample.degrees.astype(float))


def gradient(beta: np.ndarray, sample: LayerSample) -> np.ndarray:
    """Gradient of the negative log-likelihood: expected minus observed degrees."""
    return expected_degrees(beta, sample.n, sample.s) - sample.degrees.astype(float)


def degree_covariance(beta: np.ndarray, n: int, s: int) -> DegreeCovariance:
    """Degree covariance matrix; equal to the Hessian of the likelihood.

    Streams over edges and scatters each edge's psi*(1-psi) weight into
    its s diagonal and s*(s-1)/2 off-diagonal incidence cells.  Requires
    n > s so the matrix is nondegenerate.
    """
    if n <= s:
        raise ArgumentError(f"degree covariance needs n > s, got n={n}, s={s}")
    beta = _check_beta(beta, n)
    idx = subset_index_array(n, s)
    p = logistic(edge_sums(beta, idx))
    w = p * (1.0 - p)
    flat = np.zeros(n * n)
    for a in range(s):
        col_a = idx[:, a].astype(np.int64)
        for b in range(a + 1, s):
            flat += np.bincount(col_a * n + idx[:, b], weights=w, minlength=n * n)
    sigma = flat.reshape(n, n)
    sigma = sigma + sigma.T
    diag = np.zeros(n)
    for a in range(s):
        diag += np.bincount(idx[:, a], weights=w, minlength=n)
    sigma[np.arange(n), np.arange(n)] = diag
    cov = DegreeCovariance(n=n, s=s, sigma=sigma, gamma_diag=1.0 / diag)
    cov.validate()
    return cov


def gamma_surrogate(cov: DegreeCovariance) -> np.ndarray:
    """Diagonal surrogate matrix: reciprocal degree variances, zero elsewhere."""
    diag = np.diag(cov.sigma)
    if np.any(diag <= 0):
        raise NumericalError("degenerate model: zero degree variance")
    return np.diag(1.0 / diag)


def gamma_inverse_gap(beta: np.ndarray, n: int, s: int) -> float:
    """Entrywise max norm of (diagonal surrogate - inverse covariance).

    Dense symmetric factorization of the covariance; the inverse is used
    only inside this diagnostic, never for inference.
    """
    cov = degree_covariance(beta, n, s)
    try:
        inv = np.linalg.solve(cov.sigma, np.eye(n))
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(cov.sigma)
        raise NumericalError(
            f"degree covariance numerically singular (cond ~ {cond:.3e})"
        ) from exc
    gap = gamma_surrogate(cov) - inv
    return float(np.max(np.abs(gap)))


def hessian_eigen_bounds(
    beta: np.ndarray,
    n: int,
    s: int,
    bound_M: float | None = None,
    beta_ref: np.ndarray | None = None,
) -> tuple[float, float]:
    """Extreme eigenvalues of the degree covariance by symmetric eigen-solve.

    When a reference point and sup-norm bound are supplied, the returned
    minimum is checked against the analytic floor
    (1/4) e^{-s (M + ||beta - beta_ref||_2)} (C(n-1,s-1) - C(n-2,s-2));
    the maximum always respects C(n-1,s-1) - C(n-2,s-2) + n C(n-2,s-2).
    """
    cov = degree_covariance(beta, n, s)
    eigs = np.linalg.eigvalsh(cov.sigma)
    lo, hi = float(eigs[0]), float(eigs[-1])
    base = max_degree(n, s) - max_degree(n - 1, s - 1)
    hi_cap = base + n * max_degree(n - 1, s - 1)
    if hi > hi_cap * (1 + 1e-10):
        raise NumericalError("eigenvalue exceeds analytic upper bound")
    if bound_M is not None and beta_ref is not None:
        dist = float(np.linalg.norm(np.asarray(beta, dtype=float) - beta_ref))
        floor = 0.25 * np.exp(-s * (bound_M + dist)) * base
        if lo < floor * (1 - 1e-10):
            raise NumericalError("eigenvalue fell below analytic lower bound")
    return lo, hi


@dataclass
class LikelihoodWorkspace:
    """Per-sample cache of the expensive per-edge pass.

    The expected-degree vector and log-partition sum are keyed by the
    exact bytes of beta, so repeated evaluations at one point (typical
    inside safeguarded line searches) cost a single streaming pass.
    Single-writer: concurrent callers use separate workspaces.
    """

    sample: LayerSample
    _key: bytes | None = field(default=None, repr=False)
    _expected: np.ndarray | None = field(default=None, repr=False)
    _logpart: float = field(default=0.0, repr=False)

    def _refresh(self, beta: np.ndarray) -> None:
        beta = _check_beta(beta, self.sample.n)
        key = beta.tobytes()
        if key == self._key:
            return
        n, s = self.sample.n, self.sample.s
        idx = subset_index_array(n, s)
        sums = edge_sums(beta, idx)
        p = logistic(sums)
        expected = np.zeros(n)
        for j in range(s):
            expected += np.bincount(idx[:, j], weights=p, minlength=n)
        self._logpart = float(np.sum(log1p_exp(sums)))
        self._expected = expected
        self._key = key

    def expected_degrees(self, beta: np.ndarray) -> np.ndarray:
        self._refresh(beta)
        return self._expected

    def neg_log_likelihood(self, beta: np.ndarray) -> float:
        self._refresh(beta)
        return self._logpart - float(
            np.asarray(beta, dtype=float) @ self.sample.degrees.astype(float)
        )

    def gradient(self, beta: np.ndarray) -> np.ndarray:
        self._refresh(beta)
        return self._expected - self.sample.degrees.astype(float)
