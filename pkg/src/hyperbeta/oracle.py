"""Brute-force reference implementations, used only by tests.

Everything here recomputes from scratch in plain Python (math + itertools)
so that agreement with the main code paths is meaningful: no logistic
kernels, edge-index caches, or likelihood code are shared.  Performance
is a non-goal; instances are tiny by precondition.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .core import ArgumentError, BoundaryDegreeError, LayerSample, LayeredParams

__all__ = [
    "oracle_neg_log_likelihood",
    "exact_degree_distribution",
    "brute_force_mle",
    "fd_gradient",
    "fd_hessian",
]

# 2^20 hypergraphs is the largest exhaustive enumeration worth waiting for.
MAX_EXACT_EDGES = 20


def _psi(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def oracle_neg_log_likelihood(beta, sample: LayerSample) -> float:
    """Negative log-likelihood by direct summation over all edges."""
    beta = [float(b) for b in beta]
    if len(beta) != sample.n:
        raise ArgumentError("beta length mismatch")
    total = 0.0
    for edge in itertools.combinations(range(sample.n), sample.s):
        x = sum(beta[v] for v in edge)
        # log(1 + e^x), branch-stable but written independently
        total += x + math.log1p(math.exp(-x)) if x > 0 else math.log1p(math.exp(x))
    for v in range(sample.n):
        total -= beta[v] * float(sample.degrees[v])
    return total


def exact_degree_distribution(
    params: LayeredParams, s: int
) -> dict[tuple[int, ...], float]:
    """Exact joint law of the layer-s degree vector.

    Sums products of edge probabilities over every edge subset; only
    feasible while C(n, s) <= 20.
    """
    n = params.n
    beta = params.layer(s)
    edges = list(itertools.combinations(range(n), s))
    m = len(edges)
    if m > MAX_EXACT_EDGES:
        raise ArgumentError(
            f"exact enumeration needs C(n,s) <= {MAX_EXACT_EDGES}, got {m}"
        )
    probs = [_psi(sum(float(beta[v]) for v in e)) for e in edges]
    table: dict[tuple[int, ...], float] = {}
    for mask in range(1 << m):
        weight = 1.0
        degrees = [0] * n
        for j in range(m):
            if mask >> j & 1:
                weight *= probs[j]
                for v in edges[j]:
                    degrees[v] += 1
            else:
                weight *= 1.0 - probs[j]
        key = tuple(degrees)
        table[key] = table.get(key, 0.0) + weight
    return table


def _golden_minimize(f, lo: float, hi: float, tol: float) -> float:
    """Golden-section line search for a unimodal scalar function."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def brute_force_mle(
    sample: LayerSample,
    coord_tol: float = 1e-6,
    max_sweeps: int = 400,
    span: float = 12.0,
) -> np.ndarray:
    """Cyclic coordinate descent with golden-section line searches.

    Independent of the main estimator; refuses boundary degree sequences
    just like it does.  Only for n <= 6.
    """
    if sample.n > 6:
        raise ArgumentError("brute-force MLE is restricted to n <= 6")
    dmax = math.comb(sample.n - 1, sample.s - 1)
    if any(int(d) in (0, dmax) for d in sample.degrees):
        raise BoundaryDegreeError("boundary degrees: refusing brute-force fit")
    beta = [0.0] * sample.n
    for _ in range(max_sweeps):
        biggest_move = 0.0
        for v in range(sample.n):
            def along(x: float, v: int = v) -> float:
                trial = list(beta)
                trial[v] = x
                return oracle_neg_log_likelihood(trial, sample)

            new = _golden_minimize(along, beta[v] - span, beta[v] + span,
                                   tol=coord_tol / 4.0)
            biggest_move = max(biggest_move, abs(new - beta[v]))
            beta[v] = new
        if biggest_move < coord_tol:
            break
    return np.array(beta)


def fd_gradient(beta, sample: LayerSample, step: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of the brute-force likelihood."""
    if step <= 0:
        raise ArgumentError("step must be positive")
    beta = [float(b) for b in beta]
    out = np.zeros(sample.n)
    for v in range(sample.n):
        up, dn = list(beta), list(beta)
        up[v] += step
        dn[v] -= step
        out[v] = (oracle_neg_log_likelihood(up, sample)
                  - oracle_neg_log_likelihood(dn, sample)) / (2.0 * step)
    return out


def fd_hessian(beta, sample: LayerSample, step: float = 1e-4) -> np.ndarray:
    """Central-difference Hessian of the brute-force likelihood."""
    if step <= 0:
        raise ArgumentError("step must be positive")
    beta = [float(b) for b in beta]
    n = sample.n
    out = np.zeros((n, n))
    for u in range(n):
        for v in range(u, n):
            pp, pm, mp, mm = (list(beta) for _ in range(4))
            pp[u] += step; pp[v] += step
            pm[u] += step; pm[v] -= step
            mp[u] -= step; mp[v] += step
            mm[u] -= step; mm[v] -= step
            val = (oracle_neg_log_likelihood(pp, sample)
                   - oracle_neg_log_likelihood(pm, sample)
                   - oracle_neg_log_likelihood(mp, sample)
                   + oracle_neg_log_likelihood(mm, sample)) / (4.0 * step * step)
            out[u, v] = out[v, u] = val
    return out
