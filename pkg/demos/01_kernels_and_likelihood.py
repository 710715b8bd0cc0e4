"""Kernels, exact likelihood and its gradient on a small grid."""

import numpy as np

from gpclust import KernelParams, build_covariance, sample_gp
from gpclust.kernels import gaussian_loglik_exact, loglik_gradient_exact

grid = np.linspace(0, 1, 50)
truth = KernelParams("sqexp", 0.2, 0.5)
y = sample_gp(truth, grid, seed=1)

print("log-likelihood over a lengthscale sweep (sigma 0.5, nugget 1e-4):")
for l in (0.05, 0.1, 0.2, 0.4, 0.8):
    params = KernelParams("sqexp", l, 0.5, nugget=1e-4)
    ll = gaussian_loglik_exact(y, build_covariance(params, grid))
    dl, ds = loglik_gradient_exact(y, params, grid)
    print(f"  l={l:<5} loglik={ll:10.3f}  d/dl={dl:10.3f}  d/dsigma={ds:9.3f}")

K = build_covariance(KernelParams("matern12", 0.2, 1.0), grid)
print(f"matern12 covariance: diag {K[0, 0]:.6f}, K[0,1] {K[0, 1]:.6f}, cond {np.linalg.cond(K):.3g}")
