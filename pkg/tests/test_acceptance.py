"""Acceptance criteria, one test per criterion.

Each test prints a ``criterion N: PASS|FAIL`` line (collected into the
terminal summary by ``conftest.record``) and then asserts at the stated
tolerance.  Fits are shared with the EM tests through ``scenario_runs``.
"""

import os
import time
from pathlib import Path

import numpy as np
import pytest

from gpclust import (
    FitConfig,
    KernelParams,
    MixtureModel,
    assign_clusters,
    build_covariance,
    build_plan,
    e_step,
    fit,
    load_csv,
    moving_average,
    nmi,
    sample_gp,
    scenario,
    simulate_mixture,
    vecchia_inverse_cholesky,
    vecchia_kl_curve,
    vecchia_loglik,
)
from gpclust.datasets import dataset_to_csv
from gpclust.em import ExactBackend, VecchiaBackend
from gpclust.kernels import gaussian_loglik_exact, loglik_gradient_exact

from conftest import median_of, record, scenario_runs

NOAA_ENV = "GPCLUST_NOAA_CSV"
NOAA_DEFAULT = Path(__file__).parent / "data" / "noaa_north_pole_monthly.csv"
NOAA_PARTITION = {
    "jun": 1, "jul": 1, "aug": 1,
    "oct": 2, "nov": 2, "dec": 2, "jan": 2, "feb": 2,
    "mar": 3, "apr": 3, "sep": 3,
}


def random_kernel(rng):
    family = ["sqexp", "matern12"][rng.integers(2)]
    return KernelParams(family, rng.uniform(0.05, 1.0), rng.uniform(0.2, 3.0), nugget=None)


def test_criterion_1_saturated_vecchia_is_exact():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(20):
        p = int(rng.integers(2, 101))
        grid = np.sort(rng.uniform(0, 1, p))
        params = random_kernel(rng)
        params = KernelParams(params.family, params.l, params.sigma, nugget=1e-4 * params.sigma**2)
        y = sample_gp(params, grid, int(rng.integers(1 << 31)))
        plan = build_plan(grid, p - 1)
        approx = vecchia_loglik(plan.permute(y), vecchia_inverse_cholesky(params, grid, plan))
        exact = gaussian_loglik_exact(y, build_covariance(params, grid))
        worst = max(worst, abs(approx - exact) / abs(exact))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-8 and elapsed < 10
    record(1, ok, f"max rel err {worst:.2e} (<= 1e-8), {elapsed:.2f} s (< 10 s)")
    assert ok


def test_criterion_2_kl_curve_non_increasing():
    start = time.perf_counter()
    curve = vecchia_kl_curve(KernelParams("sqexp", 0.2, 0.2), np.linspace(0, 1, 100), [1, 5, 10, 20, 50, 99])
    elapsed = time.perf_counter() - start
    kl = [v for _, v in curve]
    monotone = all(b <= a + 1e-9 for a, b in zip(kl, kl[1:]))
    ok = monotone and kl[-1] <= 1e-8 and elapsed < 30
    shown = ", ".join(f"{m}:{v:.3g}" for m, v in curve)
    record(2, ok, f"KL by m {shown}; {elapsed:.2f} s")
    assert ok


def test_criterion_3_gradient_matches_finite_differences():
    rng = np.random.default_rng(303)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        p = int(rng.integers(2, 21))
        grid = np.sort(rng.uniform(0, 1, p))
        family = ["sqexp", "matern12"][rng.integers(2)]
        params = KernelParams(family, rng.uniform(0.1, 1.0), rng.uniform(0.3, 2.0), nugget=rng.uniform(1e-4, 1e-2))
        other = KernelParams(family, rng.uniform(0.1, 1.0), rng.uniform(0.3, 2.0), nugget=1e-3)
        y = sample_gp(other, grid, int(rng.integers(1 << 31)))

        def f(l, s):
            return gaussian_loglik_exact(y, build_covariance(KernelParams(family, l, s, params.nugget), grid))

        fd = []
        for j, v in enumerate((params.l, params.sigma)):
            h = 1e-5 * max(1.0, v)
            up, dn = [params.l, params.sigma], [params.l, params.sigma]
            up[j] += h
            dn[j] -= h
            fd.append((f(*up) - f(*dn)) / (2 * h))
        fd = np.array(fd)
        g = np.array(loglik_gradient_exact(y, params, grid))
        worst = max(worst, np.linalg.norm(g - fd) / np.linalg.norm(fd))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-4 and elapsed < 30
    record(3, ok, f"max rel err {worst:.2e} (<= 1e-4), {elapsed:.2f} s (< 30 s)")
    assert ok


@pytest.mark.slow
def test_criterion_4_scenario_2_vecchia_tracks_exact():
    naive = median_of(scenario_runs(2, "exact"), "nmi")
    vem = median_of(scenario_runs(2, "vecchia", 30), "nmi")
    ok = vem >= naive - 0.10 and naive >= 0.8
    record(4, ok, f"median NMI exact {naive:.3f} (>= 0.8), m=30 {vem:.3f} (>= exact - 0.10)")
    assert ok


@pytest.mark.slow
def test_criterion_5_scenario_1_larger_m_no_worse():
    low = median_of(scenario_runs(1, "vecchia", 15), "nmi")
    high = median_of(scenario_runs(1, "vecchia", 60), "nmi")
    ok = high >= low - 0.05
    record(5, ok, f"median NMI m=15 {low:.3f}, m=60 {high:.3f} (>= m=15 - 0.05)")
    assert ok


@pytest.mark.slow
def test_criterion_6a_runtime_ratio_p300():
    exact = scenario_runs(2, "exact")
    vem = scenario_runs(2, "vecchia", 30)
    ratio = float(np.median([v["spi"] / e["spi"] for v, e in zip(vem, exact)]))
    ok = ratio <= 0.6
    record("6a", ok, f"p=300 m=30 median per-iteration time ratio {ratio:.3f} (<= 0.6)")
    assert ok


@pytest.mark.slow
def test_criterion_6b_runtime_ratio_p700():
    ratios = []
    for t in range(3):
        ds = simulate_mixture(scenario(2, p=700, seed=t))
        spi = {}
        for backend, m in (("exact", None), ("vecchia", 70)):
            cfg = FitConfig(backend=backend, m=m, seed=t, restarts=1, max_iters=20, tol=1e-14)
            spi[backend] = fit(ds, 2, cfg).seconds_per_iteration
        ratios.append(spi["vecchia"] / spi["exact"])
    ratio = float(np.median(ratios))
    ok = ratio <= 0.3
    record("6b", ok, f"p=700 m=70 median per-iteration time ratio {ratio:.3f} (<= 0.3)")
    assert ok


def test_criterion_7_saturated_e_step_matches_exact():
    rng = np.random.default_rng(707)
    worst = 0.0
    for _ in range(10):
        p = int(rng.integers(5, 101))
        grid = np.sort(rng.uniform(0, 1, p))
        G = int(rng.integers(2, 4))
        comps = tuple(random_kernel(rng) for _ in range(G))
        model = MixtureModel(rng.dirichlet(np.ones(G)), comps)
        Y = np.array([sample_gp(comps[i % G], grid, int(rng.integers(1 << 31))) for i in range(12)])
        W_exact = e_step(Y, model, ExactBackend(grid))
        W_vecchia = e_step(Y, model, VecchiaBackend(grid, p - 1))
        worst = max(worst, float(np.max(np.abs(W_exact - W_vecchia))))
    ok = worst <= 1e-6
    record(7, ok, f"max entrywise responsibility difference {worst:.2e} (<= 1e-6)")
    assert ok


def noaa_path():
    return Path(os.environ.get(NOAA_ENV, NOAA_DEFAULT))


@pytest.mark.slow
def test_criterion_8_noaa_three_seasons():
    path = noaa_path()
    if not path.exists():
        record(8, None, f"no NOAA extract at {path} (set {NOAA_ENV})")
        pytest.skip(f"NOAA monthly anomaly file not found at {path}")
    ds = moving_average(load_csv(path), 5)
    res = fit(ds, 3, FitConfig(kernel="matern12", backend="vecchia", m=10, seed=0))
    keys = [name.strip().lower()[:3] for name in ds.names]
    scored = [i for i, k in enumerate(keys) if k in NOAA_PARTITION]
    truth = [NOAA_PARTITION[keys[i]] for i in scored]
    score = nmi(res.labels[scored], truth)
    ok = score >= 0.8
    record(8, ok, f"NMI {score:.3f} over {len(scored)} listed months (>= 0.8)")
    assert ok


def test_criterion_9_invariants():
    rng = np.random.default_rng(909)
    failures = []

    for _ in range(200):
        n = int(rng.integers(2, 40))
        a, b = rng.integers(1, 5, n), rng.integers(1, 5, n)
        v = nmi(a, b)
        perm = rng.permutation(4) + 10
        if v != nmi(b, a) or not 0.0 <= v <= 1.0 + 1e-12 or abs(nmi(a, perm[b - 1]) - v) > 1e-14:
            failures.append("nmi")
            break

    ds = simulate_mixture(scenario(1, p=80, seed=3))
    model = MixtureModel(np.array([0.3, 0.7]), (KernelParams("sqexp", 0.2, 0.2), KernelParams("sqexp", 0.5, 0.3)))
    for backend in (ExactBackend(ds.grid), VecchiaBackend(ds.grid, 8)):
        W = e_step(ds.curves, model, backend)
        if np.any(W < 0) or np.max(np.abs(W.sum(axis=1) - 1)) > 1e-12:
            failures.append(f"responsibilities ({backend.name})")

    for p, m in ((50, 1), (80, 8), (300, 30)):
        U = vecchia_inverse_cholesky(KernelParams("matern12", 0.2, 1.0), np.linspace(0, 1, p), build_plan(np.linspace(0, 1, p), m))
        if not U.nnz_offdiag < p * m:
            failures.append(f"sparsity p={p} m={m}")

    sims = [dataset_to_csv(simulate_mixture(scenario(2, p=60, seed=11))) for _ in range(2)]
    fits = [fit(ds, 2, FitConfig(backend="vecchia", m=6, seed=5, restarts=2)) for _ in range(2)]
    if sims[0] != sims[1] or fits[0].labels.tobytes() != fits[1].labels.tobytes():
        failures.append("determinism")
    if not np.array_equal(fits[0].objective_trace, fits[1].objective_trace):
        failures.append("determinism (trace)")
    if not np.array_equal(assign_clusters(np.array([[0.5, 0.5]])), [1]):
        failures.append("tie-break")

    ok = not failures
    record(9, ok, "nmi, responsibilities, sparsity, determinism" + ("" if ok else f"; failed: {failures}"))
    assert ok
