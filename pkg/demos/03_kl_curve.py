"""KL divergence from the exact GP to its Vecchia approximation as m grows."""

import numpy as np

from gpclust import KernelParams, vecchia_kl_curve

grid = np.linspace(0, 1, 100)
ms = [1, 2, 5, 10, 20, 50, 99]
for params in (KernelParams("sqexp", 0.2, 0.2), KernelParams("matern12", 0.2, 0.2)):
    print(params.family)
    for m, kl in vecchia_kl_curve(params, grid, ms):
        print(f"  m={m:<3} KL={kl:.4g}")
