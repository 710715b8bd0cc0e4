"""Covariance kernels, dense Cholesky algebra and exact Gaussian likelihoods.

Two stationary families are supported on one-dimensional inputs:

* ``"sqexp"``:    sigma^2 * exp(-(xi - xj)^2 / l^2)
* ``"matern12"``: sigma^2 * exp(-|xi - xj| / l)

The nugget is added on the diagonal only. When ``KernelParams.nugget`` is
left as ``None`` it tracks the scale as ``1e-8 * sigma^2``, so the whole
covariance is proportional to sigma^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import lapack

from .errors import DomainError, NotPositiveDefiniteError

FAMILIES = ("sqexp", "matern12")
RELATIVE_NUGGET = 1e-8
LOG_2PI = math.log(2.0 * math.pi)

_FAMILY_ALIASES = {
    "sqexp": "sqexp",
    "squaredexponential": "sqexp",
    "squared_exponential": "sqexp",
    "se": "sqexp",
    "rbf": "sqexp",
    "matern12": "matern12",
    "matern": "matern12",
    "exponential": "matern12",
}


def canonical_family(name: str) -> str:
    try:
        return _FAMILY_ALIASES[name.lower().replace("-", "")]
    except KeyError:
        raise DomainError(f"unknown kernel family {name!r}; expected one of {FAMILIES}")


@dataclass(frozen=True)
class KernelParams:
    """Parameters of one stationary covariance kernel.

    Parameters
    ----------
    family : {"sqexp", "matern12"}
        Kernel family (aliases such as ``"SquaredExponential"`` accepted).
    l : float
        Range parameter, in input units.
    sigma : float
        Scale parameter; the marginal variance is ``sigma**2``.
    nugget : float or None
        Diagonal jitter in variance units. ``None`` means ``1e-8 * sigma**2``.
    """

    family: str
    l: float
    sigma: float
    nugget: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", canonical_family(self.family))
        object.__setattr__(self, "l", float(self.l))
        object.__setattr__(self, "sigma", float(self.sigma))
        if not (math.isfinite(self.l) and self.l > 0):
            raise DomainError(f"range l must be positive and finite, got {self.l}")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise DomainError(f"scale sigma must be positive and finite, got {self.sigma}")
        if self.nugget is not None:
            object.__setattr__(self, "nugget", float(self.nugget))
            if not (math.isfinite(self.nugget) and self.nugget >= 0):
                raise DomainError(f"nugget must be non-negative, got {self.nugget}")

    @property
    def variance(self) -> float:
        return self.sigma * self.sigma

    @property
    def jitter(self) -> float:
        """Effective diagonal nugget."""
        if self.nugget is None:
            return RELATIVE_NUGGET * self.variance
        return self.nugget

    @property
    def relative_nugget(self) -> bool:
        return self.nugget is None

    def log_params(self) -> np.ndarray:
        return np.array([math.log(self.l), math.log(self.sigma)])

    def with_log_params(self, theta) -> "KernelParams":
        return replace(self, l=math.exp(theta[0]), sigma=math.exp(theta[1]))


def check_grid(x, require_sorted=False) -> np.ndarray:
    """Validate a set of 1-D input locations and return it as a float array."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 1:
        raise DomainError("grid must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(x)):
        raise DomainError("grid points must be finite")
    if require_sorted:
        if np.any(np.diff(x) <= 0):
            raise DomainError("grid points must be strictly increasing")
    elif np.unique(x).size != x.size:
        raise DomainError("grid points must be distinct")
    return x


def _profile(family, t):
    # correlation as a function of scaled distance t = |r| / l
    if family == "sqexp":
        return np.exp(-t * t)
    return np.exp(-t)


def kernel_eval(params: KernelParams, xi: float, xj: float) -> float:
    """Kernel value between two inputs, without the nugget."""
    if not (math.isfinite(xi) and math.isfinite(xj)):
        raise DomainError("kernel inputs must be finite")
    t = abs(xi - xj) / params.l
    if params.family == "sqexp":
        return params.variance * math.exp(-t * t)
    return params.variance * math.exp(-t)


def build_covariance(params: KernelParams, grid) -> np.ndarray:
    """Dense covariance matrix on ``grid`` with the nugget on the diagonal."""
    x = check_grid(grid)
    t = np.abs(x[:, None] - x[None, :]) / params.l
    K = params.variance * _profile(params.family, t)
    K[np.diag_indices_from(K)] = params.variance + params.jitter
    return K


def covariance_derivatives(params: KernelParams, grid, K=None):
    """Derivatives of the covariance with respect to ``log l`` and ``log sigma``."""
    x = check_grid(grid)
    if K is None:
        K = build_covariance(params, x)
    t = np.abs(x[:, None] - x[None, :]) / params.l
    if params.family == "sqexp":
        dK_l = K * (2.0 * t * t)
    else:
        dK_l = K * t
    np.fill_diagonal(dK_l, 0.0)
    dK_s = 2.0 * K
    if not params.relative_nugget:
        dK_s[np.diag_indices_from(dK_s)] -= 2.0 * params.jitter
    return dK_l, dK_s


def dense_cholesky(K) -> np.ndarray:
    """Lower Cholesky factor of a symmetric positive definite matrix."""
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {K.shape}")
    L, info = lapack.dpotrf(K, lower=1, clean=1)
    if info > 0:
        raise NotPositiveDefiniteError(info - 1)
    if info < 0:
        raise DomainError(f"invalid argument to dpotrf ({info})")
    return L


def _logdet_from_chol(L):
    return 2.0 * np.sum(np.log(np.diag(L)))


def gaussian_loglik_exact(y, K) -> float | np.ndarray:
    """Zero-mean multivariate normal log-density ``log N(y; 0, K)``.

    ``y`` may be a single vector of length p or an (N, p) stack of vectors,
    in which case one value per row is returned.
    """
    y = np.asarray(y, dtype=float)
    K = np.asarray(K, dtype=float)
    p = K.shape[0]
    if y.shape[-1] != p:
        raise DomainError(f"dimension mismatch: y has {y.shape[-1]} entries, K is {p}x{p}")
    L = dense_cholesky(K)
    Y = np.atleast_2d(y)
    z, info = lapack.dtrtrs(L, Y.T, lower=1)
    out = -0.5 * p * LOG_2PI - 0.5 * _logdet_from_chol(L) - 0.5 * np.sum(z * z, axis=0)
    return float(out[0]) if y.ndim == 1 else out


def exact_loglik_and_grad(Y, params: KernelParams, grid, gradient=True):
    """Per-curve exact log-likelihoods and their gradients in (log l, log sigma).

    Returns ``(loglik, grad)`` with shapes (N,) and (N, 2); ``grad`` is None
    when ``gradient`` is False.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    x = check_grid(grid)
    p = x.size
    K = build_covariance(params, x)
    L = dense_cholesky(K)
    A = lapack.dpotrs(L, Y.T, lower=1)[0]  # K^{-1} y_n as columns
    quad = np.sum(Y.T * A, axis=0)
    loglik = -0.5 * (p * LOG_2PI + _logdet_from_chol(L) + quad)
    if not gradient:
        return loglik, None
    Kinv, info = lapack.dpotri(L, lower=1)
    Kinv = np.tril(Kinv) + np.tril(Kinv, -1).T
    grad = np.empty((Y.shape[0], 2))
    for j, dK in enumerate(covariance_derivatives(params, x, K)):
        trace = np.sum(Kinv * dK)
        grad[:, j] = 0.5 * (np.sum(A * (dK @ A), axis=0) - trace)
    return loglik, grad


def loglik_gradient_exact(y, params: KernelParams, grid):
    """Gradient of ``log N(y; 0, K(l, sigma))`` with respect to ``(l, sigma)``.

    Computed analytically as 0.5 * (y' K^-1 dK K^-1 y - tr(K^-1 dK)).
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise DomainError("y must be a single vector")
    _, g = exact_loglik_and_grad(y, params, grid)
    return float(g[0, 0] / params.l), float(g[0, 1] / params.sigma)


def make_rng(seed: int) -> np.random.Generator:
    """Seeded generator used everywhere in the package (numpy PCG64)."""
    return np.random.Generator(np.random.PCG64(seed))


def sample_gp(params: KernelParams, grid, seed: int) -> np.ndarray:
    """One zero-mean GP draw ``L z`` with ``z`` standard normal from PCG64(seed)."""
    K = build_covariance(params, grid)
    L = dense_cholesky(K)
    z = make_rng(seed).standard_normal(K.shape[0])
    return L @ z
