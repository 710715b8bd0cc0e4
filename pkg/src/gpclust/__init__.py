"""Clustering of functional data with Gaussian-process mixtures.

Two likelihood backends share one EM driver: a dense exact one and a
Vecchia approximation built on a maximin ordering with nearest-neighbour
conditioning sets.
"""

from .datasets import (
    Dataset,
    ScenarioSpec,
    load_csv,
    moving_average,
    read_labels,
    scenario,
    simulate_mixture,
    write_csv,
    write_labels,
)
from .em import FitConfig, FitResult, MixtureModel, assign_clusters, e_step, fit, m_step
from .errors import (
    DegenerateComponentError,
    DomainError,
    EmptyDatasetError,
    GPClustError,
    NotPositiveDefiniteError,
    NumericalError,
    ParseError,
)
from .kernels import (
    KernelParams,
    build_covariance,
    dense_cholesky,
    gaussian_loglik_exact,
    kernel_eval,
    loglik_gradient_exact,
    sample_gp,
)
from .metrics import gaussian_kl, nmi, vecchia_kl_curve
from .vecchia import (
    SparseLowerTriangular,
    VecchiaPlan,
    build_plan,
    implied_covariance,
    incomplete_cholesky,
    maximin_order,
    vecchia_inverse_cholesky,
    vecchia_loglik,
)

__version__ = "0.1.0"
