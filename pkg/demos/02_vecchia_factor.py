"""Vecchia plan, sparse inverse Cholesky factor and accuracy against exact."""

import numpy as np

from gpclust import KernelParams, build_covariance, build_plan, sample_gp, vecchia_inverse_cholesky, vecchia_loglik
from gpclust.kernels import gaussian_loglik_exact

p = 200
grid = np.linspace(0, 1, p)
params = KernelParams("matern12", 0.2, 1.0)
y = sample_gp(params, grid, seed=3)
exact = gaussian_loglik_exact(y, build_covariance(params, grid))

plan = build_plan(grid, 4)
print("first ten points in maximin order:", np.round(grid[plan.order[:10]], 3))
print("conditioning set of the 11th point:", plan.csets[10])

print(f"\nexact log-likelihood {exact:.6f}")
for m in (1, 2, 5, 10, 50, p - 1):
    plan = build_plan(grid, m)
    U = vecchia_inverse_cholesky(params, grid, plan)
    approx = vecchia_loglik(plan.permute(y), U)
    print(f"  m={m:<4} nnz off-diagonal={U.nnz_offdiag:6d}  loglik={approx:.6f}  diff={approx - exact:+.2e}")
