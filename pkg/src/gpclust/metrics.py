"""Clustering agreement and Gaussian divergence measures."""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DomainError
from .kernels import build_covariance, check_grid, dense_cholesky
from .vecchia import build_plan, implied_covariance, vecchia_inverse_cholesky


def _entropy(counts, n):
    # fsum is order independent, which keeps nmi exactly symmetric
    q = counts[counts > 0] / n
    return -math.fsum(q * np.log(q))


def nmi(a, b) -> float:
    """Normalized mutual information with geometric-mean normalization.

    ``I(a; b) / sqrt(H(a) H(b))`` in nats. Two single-cluster partitions
    score 1; a single-cluster partition against a non-trivial one scores 0.
    """
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.size != b.size:
        raise DomainError(f"partitions differ in length ({a.size} vs {b.size})")
    if a.size == 0:
        raise DomainError("partitions are empty")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    n = a.size
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1.0)
    ha = _entropy(table.sum(axis=1), n)
    hb = _entropy(table.sum(axis=0), n)
    if ha == 0.0 and hb == 0.0:
        return 1.0
    if ha == 0.0 or hb == 0.0:
        return 0.0
    pa = table.sum(axis=1, keepdims=True) / n
    pb = table.sum(axis=0, keepdims=True) / n
    pab = table / n
    nz = pab > 0
    mi = math.fsum(pab[nz] * np.log(pab[nz] / (pa @ pb)[nz]))
    return float(min(max(mi / np.sqrt(ha * hb), 0.0), 1.0))


def gaussian_kl(K1, K2) -> float:
    """KL( N(0, K1) || N(0, K2) ) from Cholesky factors of both matrices."""
    K1 = np.asarray(K1, dtype=float)
    K2 = np.asarray(K2, dtype=float)
    if K1.shape != K2.shape or K1.ndim != 2 or K1.shape[0] != K1.shape[1]:
        raise DomainError(f"shape mismatch: {K1.shape} vs {K2.shape}")
    L1 = dense_cholesky(K1)
    L2 = dense_cholesky(K2)
    M = solve_triangular(L2, L1, lower=True)
    # diagonal terms grouped as (r - 1 - log r) to keep the result second order near K1 == K2
    r = np.diag(M) ** 2
    off = np.sum(np.tril(M, -1) ** 2)
    return float(0.5 * (np.sum(r - 1.0 - np.log(r)) + off))


def vecchia_kl_curve(params, grid, ms) -> list:
    """``[(m, KL(N(0, K) || N(0, K_m)))]`` for each conditioning size ``m``."""
    x = check_grid(grid)
    ms = [int(m) for m in ms]
    if ms != sorted(ms):
        raise DomainError("ms must be sorted ascending")
    K = build_covariance(params, x)
    out = []
    for m in ms:
        plan = build_plan(x, m)
        Ko = K[np.ix_(plan.order, plan.order)]
        Khat = implied_covariance(vecchia_inverse_cholesky(params, x, plan))
        out.append((m, gaussian_kl(Ko, Khat)))
    return out
