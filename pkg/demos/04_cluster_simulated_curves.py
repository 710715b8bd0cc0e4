"""Cluster the two simulated scenarios with exact EM and Vecchia EM."""

from gpclust import FitConfig, fit, nmi, scenario, simulate_mixture

for number in (1, 2):
    ds = simulate_mixture(scenario(number, seed=0))
    print(f"scenario {number}: N={ds.N} p={ds.p}")
    for backend, m in (("exact", None), ("vecchia", 5), ("vecchia", 30)):
        res = fit(ds, 2, FitConfig(backend=backend, m=m, seed=0))
        comps = ", ".join(f"(l={c.l:.3f}, sigma={c.sigma:.3f})" for c in res.model.components)
        label = backend if m is None else f"{backend} m={m}"
        print(
            f"  {label:<12} NMI={nmi(res.labels, ds.truth):.3f} iters={res.iterations:3d} "
            f"{1e3 * res.seconds_per_iteration:6.2f} ms/iter  {comps}"
        )
