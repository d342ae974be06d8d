"""Evidence lower bound of the truncated mean-field approximation.

All Gaussian factors of Q have identity covariance, so every expectation
below is available in closed form. Entropy terms are kept (they are constant
in the means) so the bound is a genuine lower bound on log P(Y | X).
"""

import numpy as np
from scipy.special import betaln, entr, log_expit

from ..model import LOG_2PI, TaskType, jj_lambda
from ..special import digamma


class NumericalError(ArithmeticError):
    """A non-finite value appeared in the objective."""

    def __init__(self, message, terms=None):
        super().__init__(message)
        self.terms = terms or {}


def beta_expectations(params):
    """E[log x] and E[log(1 - x)] under Beta(params[..., 0], params[..., 1])."""
    a, b = params[..., 0], params[..., 1]
    total = digamma(a + b)
    return digamma(a) - total, digamma(b) - total


def beta_entropy(params):
    a, b = params[..., 0], params[..., 1]
    return (betaln(a, b) - (a - 1) * digamma(a) - (b - 1) * digamma(b)
            + (a + b - 2) * digamma(a + b))


def stick_log_weights(gamma):
    """E_Q[log P(z = f)] under the truncated stick-breaking prior.

    The last stick is fixed to one, so its E[log phi_F] is zero and ``gamma[F-1]``
    never enters.
    """
    F = gamma.shape[0]
    if F == 1:
        return np.zeros(1)
    e_log, e_log1m = beta_expectations(gamma[:-1])
    out = np.zeros(F)
    out[:-1] = e_log
    out[1:] += np.cumsum(e_log1m)
    return out


def expected_sq_dev(state):
    """E_Q || theta_t - mu_f - Lambda_f (s_tf * b_tf) ||^2, shape (T, F)."""
    D = state.D
    r = state.nu_theta[:, None, :] - state.nu_mu[None, :, :] - state.mixing_mean()
    lam_sq = np.sum(state.nu_lambda ** 2, axis=1)  # (F, K)
    s, b = state.nu_s, state.nu_b
    factor_var = np.sum((lam_sq + D) * (s * s + 1.0) * b - lam_sq * (s * b) ** 2, axis=2)
    return np.sum(r * r, axis=2) + 2.0 * D + factor_var


def expected_log_sigmoid(mean, var, n_nodes=64):
    """E[log sigmoid(a)] for a ~ N(mean, var) by Gauss-Hermite quadrature."""
    nodes, weights = np.polynomial.hermite_e.hermegauss(n_nodes)
    weights = weights / weights.sum()
    mean = np.asarray(mean, dtype=float)[..., None]
    sd = np.sqrt(np.asarray(var, dtype=float))[..., None]
    return np.sum(weights * log_expit(mean + sd * nodes), axis=-1)


def likelihood_term(state, data, exact_logistic=False):
    total = 0.0
    for t, task in enumerate(data.tasks):
        if task.n == 0:
            continue
        m = task.X @ state.nu_theta[t]
        x_sq = np.sum(task.X ** 2, axis=1)
        if data.task_type is TaskType.REGRESSION:
            total += np.sum(-0.5 * LOG_2PI - 0.5 * ((task.Y - m) ** 2 + x_sq))
        elif exact_logistic:
            sign = 2.0 * task.Y - 1.0
            total += np.sum(expected_log_sigmoid(sign * m, x_sq))
        else:
            xi = state.xi[t]
            lam = jj_lambda(xi)
            total += np.sum(log_expit(xi) + 0.5 * ((2.0 * task.Y - 1.0) * m - xi)
                            - lam * (m * m + x_sq - xi * xi))
    return float(total)


def elbo_terms(state, data, h, exact_logistic=False):
    """Named contributions to the bound; their sum is the ELBO.

    With ``exact_logistic`` the classification likelihood uses E_Q[log sigmoid]
    by quadrature instead of the Jaakkola-Jordan bound.
    """
    T, D, F, K = state.T, state.D, state.F, state.K
    sigma = state.sigma
    gauss_entropy = 0.5 * (1.0 + LOG_2PI)
    terms = {}
    if T == 0:
        terms["likelihood"] = 0.0
    else:
        terms["likelihood"] = likelihood_term(state, data, exact_logistic)
    sq = expected_sq_dev(state)
    terms["theta_prior"] = float(np.sum(
        state.nu_z * (0.5 * D * (np.log(sigma) - LOG_2PI) - 0.5 * sigma * sq)))
    terms["mu_prior"] = float(-0.5 * F * D * LOG_2PI - 0.5 * (np.sum(state.nu_mu ** 2) + F * D))
    terms["lambda_prior"] = float(
        -0.5 * F * K * D * LOG_2PI - 0.5 * (np.sum(state.nu_lambda ** 2) + F * K * D))
    terms["s_prior"] = float(-0.5 * T * F * K * LOG_2PI - 0.5 * (np.sum(state.nu_s ** 2) + T * F * K))

    if K > 0:
        e_log_beta, e_log1m_beta = beta_expectations(state.rho)
        terms["b_prior"] = float(np.sum(state.nu_b * e_log_beta[None]
                                        + (1.0 - state.nu_b) * e_log1m_beta[None]))
        a = h.alpha2 / K
        terms["beta_prior"] = float(np.sum(np.log(a) + (a - 1.0) * e_log_beta))
        terms["entropy_beta"] = float(np.sum(beta_entropy(state.rho)))
    else:
        terms["b_prior"] = terms["beta_prior"] = terms["entropy_beta"] = 0.0

    terms["z_prior"] = float(np.sum(state.nu_z * stick_log_weights(state.gamma)[None, :]))
    if F > 1:
        _, e_log1m_phi = beta_expectations(state.gamma[:-1])
        terms["phi_prior"] = float(np.sum(np.log(h.alpha1) + (h.alpha1 - 1.0) * e_log1m_phi))
        terms["entropy_phi"] = float(np.sum(beta_entropy(state.gamma[:-1])))
    else:
        terms["phi_prior"] = terms["entropy_phi"] = 0.0

    terms["entropy_theta"] = T * D * gauss_entropy
    terms["entropy_mu"] = F * D * gauss_entropy
    terms["entropy_lambda"] = F * K * D * gauss_entropy
    terms["entropy_s"] = T * F * K * gauss_entropy
    terms["entropy_b"] = float(np.sum(entr(state.nu_b) + entr(1.0 - state.nu_b)))
    terms["entropy_z"] = float(np.sum(entr(state.nu_z)))

    bad = [name for name, value in terms.items() if not np.isfinite(value)]
    if bad:
        raise NumericalError(f"non-finite ELBO terms: {', '.join(bad)}", terms)
    return terms


def elbo(state, data, h, exact_logistic=False):
    return float(sum(elbo_terms(state, data, h, exact_logistic).values()))
