"""Maximum-likelihood estimation of latent class models.

Three interchangeable solvers (EM, projected quasi-Newton, SQP) share one
likelihood kernel; see :mod:`lcmopt.kernels` for the compiled/pure-Python
backend switch.
"""

from .em import EmConfig, fit_em
from .kernels import BACKEND
from .model import (
    CategoryScheme,
    Dataset,
    InputError,
    LcmParams,
    component_density,
    finite_difference_gradient,
    gradient,
    log_likelihood,
    negative_objective,
    responsibilities,
)
from .pqn import PqnConfig, SpgConfig, fit_pqn, observed_information
from .simplex import ProductSimplex, project_product, project_simplex
from .simulate import bundle_registry, get_bundle, sample
from .sqp import SqpConfig, fit_sqp

__all__ = [
    "BACKEND",
    "CategoryScheme",
    "Dataset",
    "EmConfig",
    "InputError",
    "LcmParams",
    "PqnConfig",
    "ProductSimplex",
    "SpgConfig",
    "SqpConfig",
    "bundle_registry",
    "component_density",
    "finite_difference_gradient",
    "fit_em",
    "fit_pqn",
    "fit_sqp",
    "get_bundle",
    "gradient",
    "log_likelihood",
    "negative_objective",
    "observed_information",
    "project_product",
    "project_simplex",
    "responsibilities",
    "sample",
]
