"""EM for zero-mean Gaussian-process mixtures with exact or Vecchia likelihoods.

Each EM iteration evaluates every component's per-curve log-likelihoods
(and their gradients) once, forms responsibilities from them, updates the
mixing weights in closed form and takes a single gradient-ascent step on
each component's ``(log l, log sigma)``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateComponentError, DomainError, GPClustError, NumericalError
from .kernels import KernelParams, canonical_family, check_grid, exact_loglik_and_grad
from .vecchia import build_plan, vecchia_loglik_and_grad, warm_up

DEGENERATE_MASS = 1e-8
DEGENERATE_PATIENCE = 3
RATE_GROWTH = 1.5
RATE_SHRINK = 0.5
RATE_CAP = 10.0
SPLIT_JITTER = 0.1


@dataclass(frozen=True)
class MixtureModel:
    """Mixing weights and per-component kernels (all means are zero)."""

    weights: np.ndarray
    components: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        comps = tuple(self.components)
        if w.ndim != 1 or w.size < 1 or w.size != len(comps):
            raise DomainError("need one weight per component")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise DomainError("weights must be a probability vector")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", comps)

    @property
    def G(self) -> int:
        return len(self.components)

    def to_dict(self) -> dict:
        return {
            "weights": [float(w) for w in self.weights],
            "components": [
                {"family": c.family, "l": c.l, "sigma": c.sigma, "nugget": c.jitter}
                for c in self.components
            ],
        }


@dataclass(frozen=True)
class FitConfig:
    """Settings of :func:`fit`.

    ``learning_rate`` multiplies the gradient of each component's objective
    divided by its effective number of observations (responsibility mass
    times grid length), so one value works across N and p. Single steps are
    capped at ``max_step`` in log-parameter units.

    Initial ranges are drawn log-uniformly on ``init_range`` times the grid
    span, and initial scales on ``scale_range`` times the pooled RMS of the
    data.
    """

    backend: str = "exact"
    m: int | None = None
    kernel: str = "sqexp"
    learning_rate: float = 0.5
    max_iters: int = 500
    tol: float = 1e-6
    restarts: int = 5
    seed: int = 0
    gradient: str = "analytic"
    fd_step: float = 1e-5
    max_step: float = 1.0
    init_range: tuple = (0.05, 1.0)
    scale_range: tuple = (0.5, 2.0)

    def __post_init__(self):
        if self.backend not in ("exact", "vecchia"):
            raise DomainError(f"backend must be 'exact' or 'vecchia', got {self.backend!r}")
        if self.backend == "vecchia" and self.m is None:
            raise DomainError("the vecchia backend needs a conditioning size m")
        if self.gradient not in ("analytic", "fd"):
            raise DomainError(f"gradient must be 'analytic' or 'fd', got {self.gradient!r}")
        if not self.learning_rate > 0:
            raise DomainError("learning_rate must be positive")
        if not self.tol > 0:
            raise DomainError("tol must be positive")
        if int(self.max_iters) < 1 or int(self.restarts) < 1:
            raise DomainError("max_iters and restarts must be at least 1")
        for lo, hi in (self.init_range, self.scale_range):
            if not 0 < lo <= hi:
                raise DomainError("init_range and scale_range need 0 < low <= high")
        if not self.max_step > 0 or not self.fd_step > 0:
            raise DomainError("max_step and fd_step must be positive")
        object.__setattr__(self, "kernel", canonical_family(self.kernel))


@dataclass
class FitResult:
    model: MixtureModel
    responsibilities: np.ndarray
    labels: np.ndarray
    objective_trace: list
    loglik_trace: list
    iterations: int
    converged: bool
    wall_times: dict
    backend: str
    m: int | None = None
    restart: int = 0
    warnings: list = field(default_factory=list)

    @property
    def loglik(self) -> float:
        return self.loglik_trace[-1]

    @property
    def seconds_per_iteration(self) -> float:
        loop = self.wall_times["evaluate"] + self.wall_times["e_step"] + self.wall_times["m_step"]
        return loop / max(self.iterations, 1)

    def to_dict(self) -> dict:
        return {
            "backend": self.backend,
            "m": self.m,
            "model": self.model.to_dict(),
            "labels": [int(v) for v in self.labels],
            "responsibilities": self.responsibilities.tolist(),
            "objective_trace": [float(v) for v in self.objective_trace],
            "loglik_trace": [float(v) for v in self.loglik_trace],
            "iterations": self.iterations,
            "converged": self.converged,
            "restart": self.restart,
            "warnings": list(self.warnings),
            "wall_times": dict(self.wall_times),
        }


class ExactBackend:
    """Dense Cholesky likelihood; O(p^3) per component and iteration."""

    name = "exact"

    def __init__(self, grid, gradient="analytic", fd_step=1e-5):
        self.grid = check_grid(grid)
        self.gradient = gradient
        self.fd_step = fd_step
        self.m = None

    def prepare(self, Y):
        return np.atleast_2d(np.asarray(Y, dtype=float))

    def _loglik(self, Yp, params, gradient):
        return exact_loglik_and_grad(Yp, params, self.grid, gradient)

    def loglik_and_grad(self, Yp, params: KernelParams, gradient=True):
        if not gradient or self.gradient == "analytic":
            return self._loglik(Yp, params, gradient)
        return self._loglik(Yp, params, False)[0], _central_fd(self, Yp, params)


class VecchiaBackend(ExactBackend):
    """Vecchia likelihood on a maximin plan fixed for the whole fit."""

    name = "vecchia"

    def __init__(self, grid, m, gradient="analytic", fd_step=1e-5):
        super().__init__(grid, gradient, fd_step)
        warm_up()
        self.plan = build_plan(self.grid, m)
        self.m = self.plan.m

    def prepare(self, Y):
        return np.ascontiguousarray(self.plan.permute(super().prepare(Y)))

    def _loglik(self, Yp, params, gradient):
        return vecchia_loglik_and_grad(Yp, params, self.plan, gradient)


def _central_fd(backend, Yp, params):
    theta = params.log_params()
    grad = np.empty((Yp.shape[0], 2))
    for j in range(2):
        h = backend.fd_step * max(1.0, abs(theta[j]))
        up, down = theta.copy(), theta.copy()
        up[j] += h
        down[j] -= h
        f_up = backend._loglik(Yp, params.with_log_params(up), False)[0]
        f_down = backend._loglik(Yp, params.with_log_params(down), False)[0]
        grad[:, j] = (f_up - f_down) / (2.0 * h)
    return grad


def make_backend(grid, cfg: FitConfig):
    if cfg.backend == "exact":
        return ExactBackend(grid, cfg.gradient, cfg.fd_step)
    return VecchiaBackend(grid, cfg.m, cfg.gradient, cfg.fd_step)


def _component_logliks(backend, Yp, model, gradient):
    N = Yp.shape[0]
    ll = np.empty((N, model.G))
    grads = np.empty((N, model.G, 2)) if gradient else None
    for g, comp in enumerate(model.components):
        ll[:, g], gr = backend.loglik_and_grad(Yp, comp, gradient)
        if gradient:
            grads[:, g] = gr
    if not np.all(np.isfinite(ll)):
        raise NumericalError("non-finite component log-likelihood")
    return ll, grads


def responsibilities_from_loglik(ll, weights):
    """Posterior memberships and observed-data log-likelihood via log-sum-exp."""
    with np.errstate(divide="ignore"):
        logw = np.log(weights)
    joint = ll + logw
    norm = logsumexp(joint, axis=1, keepdims=True)
    W = np.exp(joint - norm)
    W /= W.sum(axis=1, keepdims=True)
    return W, float(np.sum(norm)), joint


def e_step(Y, model: MixtureModel, backend) -> np.ndarray:
    """Responsibilities ``W[i, g]`` proportional to ``pi_g N(y_i; 0, K_g)``."""
    Yp = backend.prepare(Y)
    ll, _ = _component_logliks(backend, Yp, model, gradient=False)
    return responsibilities_from_loglik(ll, model.weights)[0]


def _update(model, W, grads, cfg, p, bounds, rates):
    N = W.shape[0]
    mass = W.sum(axis=0)
    weights = mass / N
    comps, stepped = [], []
    for g, comp in enumerate(model.components):
        if mass[g] < DEGENERATE_MASS:
            comps.append(comp)
            continue
        grad = W[:, g] @ grads[:, g]
        if not np.all(np.isfinite(grad)):
            raise NumericalError(f"non-finite gradient for component {g}")
        step = np.clip(rates[g] * grad / (mass[g] * p), -cfg.max_step, cfg.max_step)
        theta = np.clip(comp.log_params() + step, bounds[0], bounds[1])
        comps.append(comp.with_log_params(theta))
        stepped.append(g)
    return MixtureModel(weights / weights.sum(), tuple(comps)), stepped


def _log_bounds(grid, Y):
    x = np.sort(grid)
    span = x[-1] - x[0]
    spacing = np.min(np.diff(x)) if x.size > 1 else 1.0
    scale = math.sqrt(float(np.mean(np.square(Y)))) or 1.0
    lo = np.log([spacing / 10.0, scale * 1e-4])
    hi = np.log([span * 10.0 if span > 0 else 1.0, scale * 1e4])
    return lo, hi


def m_step(Y, W, model: MixtureModel, cfg: FitConfig, backend) -> MixtureModel:
    """Closed-form weights plus one gradient step per component.

    The step on ``(log l_g, log sigma_g)`` is ``learning_rate`` times the
    gradient of ``sum_i W[i, g] log N(y_i; 0, K_g)``, divided by
    ``p * sum_i W[i, g]`` and clipped to ``max_step``.
    """
    Yp = backend.prepare(Y)
    _, grads = _component_logliks(backend, Yp, model, gradient=True)
    rates = np.full(model.G, cfg.learning_rate)
    bounds = _log_bounds(backend.grid, Yp)
    return _update(model, np.asarray(W, dtype=float), grads, cfg, Yp.shape[1], bounds, rates)[0]


def assign_clusters(W) -> np.ndarray:
    """1-based hard labels; ties go to the lowest component."""
    return np.argmax(np.asarray(W), axis=1) + 1


def _draw_component(rng, cfg, span, scale):
    lo = np.log([cfg.init_range[0], cfg.scale_range[0]])
    hi = np.log([cfg.init_range[1], cfg.scale_range[1]])
    u = rng.uniform(lo, hi)
    return KernelParams(cfg.kernel, math.exp(u[0]) * span, math.exp(u[1]) * scale)


def _split_component(rng, donor):
    # a jittered copy of the heaviest component, so it starts where curves are
    return donor.with_log_params(donor.log_params() + rng.uniform(-SPLIT_JITTER, SPLIT_JITTER, size=2))


def initial_model(G, cfg: FitConfig, grid, Y, rng) -> MixtureModel:
    """Uniform weights; ranges drawn log-uniformly on ``init_range`` times the
    grid span and scales log-uniformly on ``scale_range`` times the pooled
    RMS of the data."""
    span, scale = _init_scales(grid, Y)
    comps = tuple(_draw_component(rng, cfg, span, scale) for _ in range(G))
    return MixtureModel(np.full(G, 1.0 / G), comps)


def _init_scales(grid, Y):
    span = float(np.ptp(grid)) or 1.0
    scale = math.sqrt(float(np.mean(np.square(Y)))) or 1.0
    return span, scale


def _run(Yp, G, cfg, backend, rng, bounds, times):
    grid = backend.grid
    span, scale = _init_scales(grid, Yp)
    model = initial_model(G, cfg, grid, Yp, rng)
    p = Yp.shape[1]
    objective, logliks, notes = [], [], []
    starved = np.zeros(G, dtype=int)
    reseeded = np.zeros(G, dtype=bool)
    rates = np.full(G, float(cfg.learning_rate))
    converged = False
    previous = None
    W = None
    it = 0
    for it in range(1, int(cfg.max_iters) + 1):
        t0 = time.perf_counter()
        ll, grads = _component_logliks(backend, Yp, model, gradient=True)
        t1 = time.perf_counter()
        rejected = False
        if previous is not None:
            # keep a component's step only if it did not lower its share of Q
            old_model, old_ll, old_grads, old_W, stepped = previous
            comps = list(model.components)
            for g in stepped:
                if old_W[:, g] @ ll[:, g] < old_W[:, g] @ old_ll[:, g]:
                    comps[g] = old_model.components[g]
                    ll[:, g], grads[:, g] = old_ll[:, g], old_grads[:, g]
                    rates[g] *= RATE_SHRINK
                    rejected = True
                else:
                    rates[g] = min(rates[g] * RATE_GROWTH, cfg.learning_rate * RATE_CAP)
            model = MixtureModel(model.weights, tuple(comps))
        W, obs, joint = responsibilities_from_loglik(ll, model.weights)
        objective.append(float(np.sum(W * np.where(W > 0, joint, 0.0))))
        logliks.append(obs)
        t2 = time.perf_counter()
        times["evaluate"] += t1 - t0
        times["e_step"] += t2 - t1
        if it > 1 and not rejected and abs(obs - logliks[-2]) <= cfg.tol * abs(logliks[-2]):
            converged = True
            break
        if it == cfg.max_iters:
            break
        new_model, stepped = _update(model, W, grads, cfg, p, bounds, rates)
        mass = W.sum(axis=0)
        starved = np.where(mass < DEGENERATE_MASS, starved + 1, 0)
        for g in np.flatnonzero(starved >= DEGENERATE_PATIENCE):
            if reseeded[g]:
                raise DegenerateComponentError(g)
            reseeded[g] = True
            starved[g] = 0
            rates[g] = cfg.learning_rate
            comps = list(new_model.components)
            comps[g] = _split_component(rng, new_model.components[int(np.argmax(mass))])
            new_model = MixtureModel(np.full(G, 1.0 / G), tuple(comps))
            notes.append(f"iteration {it}: component {g} lost all mass and was re-seeded from component {int(np.argmax(mass))}")
        previous = (model, ll, grads, W, stepped)
        model = new_model
        times["m_step"] += time.perf_counter() - t2
    return model, W, objective, logliks, it, converged, notes


def fit(Y, G: int, cfg: FitConfig, grid=None, backend=None) -> FitResult:
    """Fit a G-component GP mixture by (generalized) EM.

    Parameters
    ----------
    Y : Dataset or (N, p) array
        Curves on a shared grid. When an array is given, ``grid`` is required.
    G : int
        Number of components.
    cfg : FitConfig
    backend : ExactBackend or VecchiaBackend, optional
        Prebuilt backend (lets several fits share one Vecchia plan).

    Returns
    -------
    FitResult
        The restart with the highest final observed-data log-likelihood.
        Restarts ending in a degenerate component are skipped; if all of
        them do, :class:`DegenerateComponentError` is raised.
    """
    if hasattr(Y, "curves"):
        grid = Y.grid if grid is None else grid
        Y = Y.curves
    if grid is None:
        raise DomainError("grid is required when Y is an array")
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    G = int(G)
    if not 1 <= G <= Y.shape[0]:
        raise DomainError(f"need 1 <= G <= N, got G={G}, N={Y.shape[0]}")
    t0 = time.perf_counter()
    backend = backend or make_backend(grid, cfg)
    Yp = backend.prepare(Y)
    setup = time.perf_counter() - t0
    bounds = _log_bounds(backend.grid, Yp)
    best, failures = None, []
    for r in range(int(cfg.restarts)):
        rng = np.random.default_rng([int(cfg.seed), r])
        times = {"setup": setup, "evaluate": 0.0, "e_step": 0.0, "m_step": 0.0}
        try:
            model, W, obj, lls, iters, conv, notes = _run(Yp, G, cfg, backend, rng, bounds, times)
        except GPClustError as exc:
            failures.append((r, exc))
            continue
        if best is None or lls[-1] > best.loglik:
            best = FitResult(
                model=model,
                responsibilities=W,
                labels=assign_clusters(W),
                objective_trace=obj,
                loglik_trace=lls,
                iterations=iters,
                converged=conv,
                wall_times=times,
                backend=backend.name,
                m=backend.m,
                restart=r,
                warnings=notes,
            )
    if best is None:
        degenerate = [e for _, e in failures if isinstance(e, DegenerateComponentError)]
        raise degenerate[0] if degenerate else failures[0][1]
    if failures:
        best.warnings.extend(f"restart {r} failed: {e}" for r, e in failures)
    if not best.converged:
        best.warnings.append(f"stopped at max_iters={cfg.max_iters} without converging")
    return best


def with_backend(cfg: FitConfig, backend: str, m=None) -> FitConfig:
    return replace(cfg, backend=backend, m=m)
