"""Vecchia approximation: maximin ordering, conditioning sets and sparse factors.

All factor objects live in *ordered* coordinates: position ``i`` refers to
``grid[plan.order[i]]``. Curves must be permuted with ``plan.order`` before
they are passed to :func:`vecchia_loglik`.

The Vecchia precision is ``U U^T`` with ``U`` upper triangular. Column ``i``
of ``U`` only has entries at the conditioning set of ``i``, so we store it
row-wise as the lower-triangular ``U^T`` (one padded row per position).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from . import _vecchia_kernels as _vk
from .errors import DomainError, NumericalError
from .kernels import LOG_2PI, KernelParams, check_grid

DENSIFY_LIMIT = 2000


def maximin_order(grid) -> np.ndarray:
    """Greedy maximum-minimum-distance ordering of the grid points.

    The first point is the one nearest the centroid; every later point
    maximizes its distance to the points already ordered. Ties go to the
    leftmost location, which is the smallest index on a sorted grid.

    Returns
    -------
    numpy.ndarray
        0-based permutation of ``range(p)``.
    """
    x = check_grid(grid)
    # work on sorted locations so the result ignores storage order
    srt = np.argsort(x, kind="stable")
    xs = x[srt]
    p = xs.size
    order = np.empty(p, dtype=np.int64)
    first = int(np.argmin(np.abs(xs - xs.mean())))
    order[0] = first
    mind = np.abs(xs - xs[first])
    mind[first] = -np.inf
    for k in range(1, p):
        j = int(np.argmax(mind))
        order[k] = j
        np.minimum(mind, np.abs(xs - xs[j]), out=mind)
        mind[j] = -np.inf
    return srt[order]


@dataclass(frozen=True)
class VecchiaPlan:
    """Ordering and conditioning sets of a Vecchia approximation.

    Attributes
    ----------
    order : ndarray of int, shape (p,)
        Maximin permutation of the original grid indices.
    m : int
        Cap on the conditioning-set size.
    neighbors : ndarray of int, shape (p, m)
        ``neighbors[i, :counts[i]]`` are the ordered positions conditioned on
        by position ``i`` (nearest first); the rest is padding (-1).
    counts : ndarray of int, shape (p,)
        ``min(m, i)`` for row ``i``.
    x_ordered : ndarray, shape (p,)
        Grid values in maximin order.
    pair_dist : ndarray
        Distinct distances needed by any row's kernel block, one per
        unordered pair of positions.
    block_idx, cross_idx : ndarray of int32
        ``pair_dist`` index of the (a, b) entry of row ``i``'s block and of
        the covariance between ``i`` and its a-th neighbor.
    """

    order: np.ndarray
    m: int
    neighbors: np.ndarray
    counts: np.ndarray
    x_ordered: np.ndarray = field(repr=False)
    pair_dist: np.ndarray = field(repr=False)
    block_idx: np.ndarray = field(repr=False)
    cross_idx: np.ndarray = field(repr=False)

    @property
    def p(self) -> int:
        return self.order.size

    @property
    def csets(self) -> list:
        return [self.neighbors[i, : self.counts[i]].copy() for i in range(self.p)]

    @property
    def pattern(self) -> set:
        """Lower-triangular support ``{(i, j)}``: diagonal plus conditioning sets."""
        S = {(i, i) for i in range(self.p)}
        for i in range(self.p):
            S.update((i, int(j)) for j in self.neighbors[i, : self.counts[i]])
        return S

    def pattern_matrix(self) -> np.ndarray:
        S = np.eye(self.p, dtype=bool)
        rows = np.repeat(np.arange(self.p), self.counts)
        cols = self.neighbors[self.neighbors >= 0]
        S[rows, cols] = True
        return S

    def permute(self, Y) -> np.ndarray:
        """Reorder the last axis of ``Y`` from grid order to maximin order."""
        return np.asarray(Y)[..., self.order]


def build_plan(grid, m: int) -> VecchiaPlan:
    """Maximin ordering plus nearest-previous-neighbor conditioning sets.

    Ties between equidistant neighbors go to the earlier ordered position.
    """
    x = check_grid(grid)
    p = x.size
    if p < 2:
        raise DomainError("a Vecchia plan needs at least two grid points")
    if not (1 <= int(m) <= p - 1) or int(m) != m:
        raise DomainError(f"conditioning size m must be an integer in [1, {p - 1}], got {m}")
    m = int(m)
    order = maximin_order(x)
    xo = x[order]
    neighbors = np.full((p, m), -1, dtype=np.int64)
    counts = np.minimum(np.arange(p), m).astype(np.int64)
    for i in range(1, p):
        d = np.abs(xo[:i] - xo[i])
        k = counts[i]
        neighbors[i, :k] = np.argsort(d, kind="stable")[:k]
    return VecchiaPlan(order, m, neighbors, counts, xo, *_pair_tables(xo, neighbors))


def _pair_tables(xo, neighbors):
    # Conditioning sets overlap heavily, so each distinct pair's kernel value
    # is computed once per parameter setting and gathered into the blocks.
    p, m = neighbors.shape
    nb = np.where(neighbors >= 0, neighbors, 0)
    rows = np.arange(p)[:, None]
    a, b = nb[:, :, None], nb[:, None, :]
    block_keys = np.maximum(a, b) * p + np.minimum(a, b)
    cross_keys = np.maximum(nb, rows) * p + np.minimum(nb, rows)
    keys, inverse = np.unique(
        np.concatenate([block_keys.ravel(), cross_keys.ravel()]), return_inverse=True
    )
    inverse = inverse.astype(np.int32)
    block_idx = inverse[: block_keys.size].reshape(p, m, m)
    cross_idx = inverse[block_keys.size :].reshape(p, m)
    pair_dist = np.abs(xo[keys // p] - xo[keys % p])
    return pair_dist, block_idx, cross_idx


@dataclass(frozen=True)
class SparseLowerTriangular:
    """Lower-triangular matrix with a padded row-wise sparse layout.

    Row ``i`` holds ``diag[i]`` and off-diagonal values ``vals[i, a]`` at
    columns ``cols[i, a]`` (``cols < 0`` marks padding, whose value is 0).
    """

    diag: np.ndarray
    cols: np.ndarray
    vals: np.ndarray

    @property
    def p(self) -> int:
        return self.diag.size

    @property
    def nnz_offdiag(self) -> int:
        return int(np.count_nonzero(self.cols >= 0))

    def matvec(self, y) -> np.ndarray:
        """``L @ y`` along the last axis of ``y``."""
        y = np.asarray(y, dtype=float)
        if y.shape[-1] != self.p:
            raise DomainError(f"dimension mismatch: got {y.shape[-1]}, expected {self.p}")
        gathered = y[..., np.where(self.cols >= 0, self.cols, 0)]
        return self.diag * y + np.sum(gathered * self.vals, axis=-1)

    def to_dense(self) -> np.ndarray:
        L = np.diag(self.diag)
        rows, slots = np.nonzero(self.cols >= 0)
        L[rows, self.cols[rows, slots]] = self.vals[rows, slots]
        return L

    @classmethod
    def from_dense(cls, L, pattern) -> "SparseLowerTriangular":
        L = np.asarray(L, dtype=float)
        S = np.tril(np.asarray(pattern, dtype=bool), -1)
        p = L.shape[0]
        width = max(int(S.sum(axis=1).max(initial=0)), 1)
        cols = np.full((p, width), -1, dtype=np.int64)
        vals = np.zeros((p, width))
        for i in range(p):
            js = np.flatnonzero(S[i])
            cols[i, : js.size] = js
            vals[i, : js.size] = L[i, js]
        return cls(np.diag(L).copy(), cols, vals)


def _pair_kernel(params: KernelParams, plan: VecchiaPlan, derivative=False):
    t = plan.pair_dist / params.l
    if params.family == "sqexp":
        kv = params.variance * np.exp(-t * t)
        dkv = 2.0 * t * t * kv if derivative else None
    else:
        kv = params.variance * np.exp(-t)
        dkv = t * kv if derivative else None
    return kv, dkv


def vecchia_inverse_cholesky(params: KernelParams, grid, plan: VecchiaPlan) -> SparseLowerTriangular:
    """Sparse inverse Cholesky factor of the Vecchia-implied covariance.

    Returns ``U^T`` (lower triangular, ordered coordinates) such that
    ``U U^T`` is the Vecchia precision matrix. Row ``i`` is
    ``(-b / sqrt(d)) at c(i)`` and ``1 / sqrt(d)`` on the diagonal, where
    ``b`` and ``d`` are the regression coefficients and conditional variance
    of position ``i`` given its conditioning set.
    """
    x = check_grid(grid)
    if x.size != plan.p:
        raise DomainError(f"plan was built for p={plan.p}, grid has {x.size} points")
    kv, _ = _pair_kernel(params, plan)
    diag, vals, bad = _vk.factor_rows(
        plan.neighbors, plan.counts, plan.block_idx, plan.cross_idx, kv, params.variance, params.jitter
    )
    if bad < 0 and not np.all(np.isfinite(diag)):
        bad = int(np.flatnonzero(~np.isfinite(diag))[0])
    if bad >= 0:
        raise NumericalError(
            f"non-positive conditional variance at ordered position {bad} "
            f"(grid index {plan.order[bad]}); increase the nugget",
            index=int(bad),
        )
    return SparseLowerTriangular(diag, plan.neighbors.copy(), vals)


def vecchia_loglik(y, factor: SparseLowerTriangular):
    """Vecchia log-density from the factor ``U^T`` returned above.

    ``y`` must already be in maximin order (see :meth:`VecchiaPlan.permute`);
    a (N, p) array gives one value per row.
    """
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != factor.p:
        raise DomainError(f"dimension mismatch: y has {y.shape[-1]} entries, factor is {factor.p}")
    z = factor.matvec(y)
    out = -0.5 * factor.p * LOG_2PI + np.sum(np.log(factor.diag)) - 0.5 * np.sum(z * z, axis=-1)
    return float(out) if y.ndim == 1 else out


def warm_up() -> None:
    """Load or compile the numba kernels now rather than inside a timed loop."""
    plan = build_plan(np.array([0.0, 1.0]), 1)
    vecchia_loglik_and_grad(np.zeros((1, 2)), KernelParams("sqexp", 1.0, 1.0), plan)
    vecchia_inverse_cholesky(KernelParams("sqexp", 1.0, 1.0), np.array([0.0, 1.0]), plan)


def vecchia_loglik_and_grad(Yo, params: KernelParams, plan: VecchiaPlan, gradient=True):
    """Per-curve Vecchia log-likelihoods and analytic (log l, log sigma) gradients.

    Fused single pass over the ordered positions; never forms the factor.
    ``Yo`` is (N, p) in maximin order.
    """
    YT = np.ascontiguousarray(np.atleast_2d(Yo).T, dtype=float)
    kv, dkv = _pair_kernel(params, plan, derivative=gradient)
    ll, grad, bad = _vk.loglik_rows(
        plan.neighbors, plan.counts, plan.block_idx, plan.cross_idx, kv,
        kv if dkv is None else dkv, params.variance, params.jitter,
        params.relative_nugget, YT, gradient,
    )
    if bad >= 0:
        raise NumericalError(
            f"non-positive conditional variance at ordered position {bad}; increase the nugget",
            index=int(bad),
        )
    if not (np.all(np.isfinite(ll)) and (not gradient or np.all(np.isfinite(grad)))):
        raise NumericalError("non-finite Vecchia log-likelihood; increase the nugget")
    return ll, (grad if gradient else None)


def incomplete_cholesky(Sigma, pattern) -> SparseLowerTriangular:
    """Cholesky factorization restricted to a sparsity pattern.

    Entries outside ``pattern`` are forced to zero; those inside follow the
    usual recursion

        L[i, j] = (Sigma[i, j] - sum_u L[i, u] L[j, u]) / L[j, j]
        L[i, i] = sqrt(Sigma[i, i] - sum_u L[i, u]^2)

    With a full lower pattern the result is the exact Cholesky factor.

    Parameters
    ----------
    Sigma : (p, p) array
        Symmetric positive definite matrix.
    pattern : (p, p) bool array or VecchiaPlan
        Allowed positions; only the strict lower triangle is read.
    """
    Sigma = np.asarray(Sigma, dtype=float)
    p = Sigma.shape[0]
    if isinstance(pattern, VecchiaPlan):
        pattern = pattern.pattern_matrix()
    S = np.asarray(pattern, dtype=bool)
    if S.shape != Sigma.shape:
        raise DomainError(f"pattern shape {S.shape} does not match matrix shape {Sigma.shape}")
    L = np.zeros_like(Sigma)
    for i in range(p):
        js = np.flatnonzero(S[i, :i])
        for j in js:
            L[i, j] = (Sigma[i, j] - L[i, :j] @ L[j, :j]) / L[j, j]
        s = Sigma[i, i] - L[i, :i] @ L[i, :i]
        if not s > 0:
            raise NumericalError(f"negative value under the square root at row {i}", index=i)
        L[i, i] = np.sqrt(s)
    return SparseLowerTriangular.from_dense(L, S)


def implied_covariance(factor: SparseLowerTriangular) -> np.ndarray:
    """Dense Vecchia covariance ``(U U^T)^-1``, for validation at small p."""
    if factor.p > DENSIFY_LIMIT:
        raise DomainError(f"refusing to densify p={factor.p} > {DENSIFY_LIMIT}")
    # (U U^T)^-1 = W W^T with W = (U^T)^-1
    W = solve_triangular(factor.to_dense(), np.eye(factor.p), lower=True)
    return W @ W.T
