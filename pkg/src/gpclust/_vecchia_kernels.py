"""Compiled inner loops for the Vecchia factor and likelihood.

Every row ``i`` (in maximin order) is handled independently: gather the
kernel block on its conditioning set from the per-pair values ``kv``,
factor it, and form the regression coefficients ``b`` and conditional
variance ``d``. Rows with ``d <= 0``
are reported through the returned error index instead of raising, since
numba cannot build formatted exceptions. Fast-math may drop NaN checks, so
callers also verify that the outputs are finite.
"""

import math

import numpy as np
from numba import njit

_LOG_2PI = math.log(2.0 * math.pi)


@njit(cache=True, fastmath=True, error_model="numpy")
def _row_system(block_idx, cross_idx, i, k, kv, s2, nug, C0, L, c):
    for a in range(k):
        c[a] = kv[cross_idx[i, a]]
        for b in range(a):
            v = kv[block_idx[i, a, b]]
            C0[a, b] = v
            L[a, b] = v
        C0[a, a] = s2
        L[a, a] = s2 + nug


@njit(cache=True, fastmath=True, error_model="numpy")
def _chol_inplace(L, k):
    # lower triangle of L holds the block; returns False on a bad pivot
    for j in range(k):
        s = L[j, j]
        for q in range(j):
            s -= L[j, q] * L[j, q]
        if s <= 0.0:
            return False
        d = math.sqrt(s)
        L[j, j] = d
        for r in range(j + 1, k):
            s = L[r, j]
            for q in range(j):
                s -= L[r, q] * L[j, q]
            L[r, j] = s / d
    return True


@njit(cache=True, fastmath=True, error_model="numpy")
def _chol_solve(L, k, rhs, tmp, out):
    for a in range(k):
        s = rhs[a]
        for q in range(a):
            s -= L[a, q] * tmp[q]
        tmp[a] = s / L[a, a]
    for a in range(k - 1, -1, -1):
        s = tmp[a]
        for q in range(a + 1, k):
            s -= L[q, a] * out[q]
        out[a] = s / L[a, a]


@njit(cache=True, fastmath=True, error_model="numpy")
def factor_rows(nbrs, counts, block_idx, cross_idx, kv, s2, nug):
    """Rows of U^T: ``diag[i] = 1/sqrt(d_i)``, ``vals[i, a] = -b_a / sqrt(d_i)``."""
    p, m = nbrs.shape
    diag = np.empty(p)
    vals = np.zeros((p, m))
    C0 = np.empty((m, m))
    L = np.empty((m, m))
    c = np.empty(m)
    tmp = np.empty(m)
    b = np.empty(m)
    for i in range(p):
        k = counts[i]
        _row_system(block_idx, cross_idx, i, k, kv, s2, nug, C0, L, c)
        if not _chol_inplace(L, k):
            return diag, vals, i
        _chol_solve(L, k, c, tmp, b)
        d = s2 + nug
        for a in range(k):
            d -= c[a] * b[a]
        if not d > 0.0:
            return diag, vals, i
        r = 1.0 / math.sqrt(d)
        diag[i] = r
        for a in range(k):
            vals[i, a] = -b[a] * r
    return diag, vals, -1


@njit(cache=True, fastmath=True, error_model="numpy")
def loglik_rows(nbrs, counts, block_idx, cross_idx, kv, dkv, s2, nug, rel_nug, YT, gradient):
    """Per-curve Vecchia log-likelihoods and (log l, log sigma) gradients.

    ``YT`` is the (p, N) matrix of curves in maximin order. The gradient of
    each univariate conditional term is accumulated from the derivatives of
    ``b`` and ``d``:  db = C^-1 (dc - dC b),  dd = dK_ii - 2 dc.b + b.dC.b.
    """
    p, m = nbrs.shape
    N = YT.shape[1]
    ll = np.zeros(N)
    grad = np.zeros((N, 2))
    C0 = np.empty((m, m))
    L = np.empty((m, m))
    c = np.empty(m)
    tmp = np.empty(m)
    b = np.empty(m)
    u = np.empty(m)
    rhs = np.empty(m)
    db = np.empty(m)
    dc = np.empty(m)
    r = np.empty(N)
    dr = np.empty(N)
    sig_nug = 2.0 * nug if rel_nug else 0.0
    for i in range(p):
        k = counts[i]
        _row_system(block_idx, cross_idx, i, k, kv, s2, nug, C0, L, c)
        if not _chol_inplace(L, k):
            return ll, grad, i
        _chol_solve(L, k, c, tmp, b)
        d = s2 + nug
        for a in range(k):
            d -= c[a] * b[a]
        if not d > 0.0:
            return ll, grad, i
        for n in range(N):
            r[n] = YT[i, n]
        for a in range(k):
            row = YT[nbrs[i, a]]
            ba = b[a]
            for n in range(N):
                r[n] -= ba * row[n]
        half_logd = 0.5 * (_LOG_2PI + math.log(d))
        for n in range(N):
            ll[n] -= half_logd + 0.5 * r[n] * r[n] / d
        if not gradient:
            continue
        for j in range(2):
            # u = dC b, dc for parameter j (0: log l, 1: log sigma)
            if j == 0:
                for a in range(k):
                    dc[a] = dkv[cross_idx[i, a]]
                    u[a] = 0.0
                for a in range(k):
                    for q in range(a):
                        v = dkv[block_idx[i, a, q]]
                        u[a] += v * b[q]
                        u[q] += v * b[a]
                dkii = 0.0
            else:
                # dC = 2 C0 + sig_nug I and C b = c, so dC b needs no block pass
                shift = sig_nug - 2.0 * nug
                for a in range(k):
                    dc[a] = 2.0 * c[a]
                    u[a] = 2.0 * c[a] + shift * b[a]
                dkii = 2.0 * s2 + sig_nug
            dd = dkii
            for a in range(k):
                dd += b[a] * (u[a] - 2.0 * dc[a])
                rhs[a] = dc[a] - u[a]
            dr[:] = 0.0
            if j == 1 and rel_nug:
                # b is scale invariant when the nugget tracks sigma^2
                for n in range(N):
                    rn = r[n]
                    grad[n, j] += dd * (rn * rn / d - 1.0) / (2.0 * d)
                continue
            _chol_solve(L, k, rhs, tmp, db)
            for a in range(k):
                row = YT[nbrs[i, a]]
                dba = db[a]
                for n in range(N):
                    dr[n] -= dba * row[n]
            for n in range(N):
                rn = r[n]
                grad[n, j] += dd * (rn * rn / d - 1.0) / (2.0 * d) - rn * dr[n] / d
    return ll, grad, -1
