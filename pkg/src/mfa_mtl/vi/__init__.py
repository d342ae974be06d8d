"""Truncated mean-field variational inference for the mixture of factor analyzers."""

from .elbo import NumericalError, elbo, elbo_terms, expected_sq_dev
from .fit import ElboDecreaseError, fit, make_report, predict
from .state import VariationalState, init_state
from .theta import ThetaConvergenceWarning, optimize_theta, theta_gradient
from .updates import (update_b, update_gamma, update_lambda, update_mu, update_rho,
                      update_s, update_sigma, update_xi, update_z)

__all__ = [
    "ElboDecreaseError", "NumericalError", "ThetaConvergenceWarning", "VariationalState",
    "elbo", "elbo_terms", "expected_sq_dev", "fit", "init_state", "make_report",
    "optimize_theta", "predict", "theta_gradient", "update_b", "update_gamma",
    "update_lambda", "update_mu", "update_rho", "update_s", "update_sigma",
    "update_xi", "update_z",
]
