"""Closed-form coordinate-ascent updates.

Each function returns a new state in which one block of variational
parameters is replaced by its exact maximizer of the ELBO, all other blocks
held fixed. Factor-level blocks (``nu_b``, ``nu_s``, ``nu_lambda``) are swept
one factor at a time because factors within a component interact through the
shared residual.
"""

import numpy as np
from scipy.special import expit, logsumexp

from ..model import TaskType
from .elbo import beta_expectations, expected_sq_dev, stick_log_weights

SIGMA_RULES = ("closed_form", "elbo")


def update_gamma(state, h):
    """Stick-breaking Beta parameters from the expected component counts."""
    counts = state.nu_z.sum(axis=0)
    tail = np.concatenate([np.cumsum(counts[::-1])[::-1][1:], [0.0]])
    gamma = np.stack([1.0 + counts, h.alpha1 + tail], axis=1)
    return state.evolve(gamma=gamma)


def update_z(state, data=None, h=None):
    """Component responsibilities, normalized in log space."""
    log_w = stick_log_weights(state.gamma)[None, :] - 0.5 * state.sigma * expected_sq_dev(state)
    nu_z = np.exp(log_w - logsumexp(log_w, axis=1, keepdims=True))
    return state.evolve(nu_z=nu_z)


def update_rho(state, h):
    K = state.K
    if K == 0:
        return state
    on = state.nu_b.sum(axis=0)
    rho = np.stack([h.alpha2 / K + on, 1.0 + (state.T - on)], axis=2)
    return state.evolve(rho=rho)


def _residual(state):
    return state.nu_theta[:, None, :] - state.nu_mu[None, :, :] - state.mixing_mean()


def update_b(state, data=None):
    """Factor usage probabilities, one factor at a time."""
    if state.K == 0:
        return state
    D, sigma, nu_z = state.D, state.sigma, state.nu_z
    e_log, e_log1m = beta_expectations(state.rho)
    prior_logit = e_log - e_log1m  # (F, K)
    lam = state.nu_lambda
    s = state.nu_s
    b = state.nu_b.copy()
    r = _residual(state)
    for k in range(state.K):
        col = lam[:, :, k]  # (F, D)
        c = r + col[None] * (s[:, :, k] * b[:, :, k])[..., None]
        proj = np.einsum("tfd,fd->tf", c, col)
        col_sq = np.sum(col * col, axis=1)[None, :]
        sk = s[:, :, k]
        gain = proj * sk - 0.5 * (col_sq + D) * (sk * sk + 1.0)
        b[:, :, k] = expit(prior_logit[None, :, k] + sigma * nu_z * gain)
        r = c - col[None] * (sk * b[:, :, k])[..., None]
    return state.evolve(nu_b=b)


def update_s(state, data=None):
    """Factor scores: precision-weighted combination of N(0, 1) prior and residual fit."""
    if state.K == 0:
        return state
    D, sigma, nu_z = state.D, state.sigma, state.nu_z
    lam = state.nu_lambda
    b = state.nu_b
    s = state.nu_s.copy()
    r = _residual(state)
    for k in range(state.K):
        col = lam[:, :, k]
        bk = b[:, :, k]
        c = r + col[None] * (s[:, :, k] * bk)[..., None]
        proj = np.einsum("tfd,fd->tf", c, col)
        col_sq = np.sum(col * col, axis=1)[None, :]
        weight = sigma * nu_z * bk
        s[:, :, k] = weight * proj / (1.0 + weight * (col_sq + D))
        r = c - col[None] * (s[:, :, k] * bk)[..., None]
    return state.evolve(nu_s=s)


def update_lambda(state, data=None):
    """Factor loading columns: conjugate Gaussian posterior means."""
    if state.K == 0:
        return state
    sigma, nu_z = state.sigma, state.nu_z
    lam = state.nu_lambda.copy()
    s, b = state.nu_s, state.nu_b
    r = _residual(state)
    for k in range(state.K):
        sk, bk = s[:, :, k], b[:, :, k]
        c = r + lam[None, :, :, k] * (sk * bk)[..., None]
        num = sigma * np.einsum("tf,tfd->fd", nu_z * sk * bk, c)
        den = 1.0 + sigma * np.sum(nu_z * bk * (sk * sk + 1.0), axis=0)
        lam[:, :, k] = num / den[:, None]
        r = c - lam[None, :, :, k] * (sk * bk)[..., None]
    return state.evolve(nu_lambda=lam)


def update_mu(state, data=None):
    """Component means: conjugate posterior under the N(0, I) prior."""
    sigma, nu_z = state.sigma, state.nu_z
    target = state.nu_theta[:, None, :] - state.mixing_mean()  # (T, F, D)
    num = sigma * np.einsum("tf,tfd->fd", nu_z, target)
    den = 1.0 + sigma * nu_z.sum(axis=0)
    return state.evolve(nu_mu=num / den[:, None])


def closed_form_inverse_sigma(state):
    """The empirical-Bayes expression for 1/sigma as a closed-form ratio of residual and usage terms.

    With K = 0 the expression divides by zero; the residual-only estimate
    sum nu_z ||nu_theta - nu_mu||^2 / (T D) is used instead.
    """
    T, D, F, K = state.T, state.D, state.F, state.K
    r = _residual(state)
    sq = np.sum(r * r, axis=2)
    if K == 0:
        return float(np.sum(state.nu_z * sq) / (T * D))
    lam_sq = np.sum(state.nu_lambda ** 2, axis=1)  # (F, K)
    usage = np.sum(state.nu_b * (state.nu_s ** 2 + lam_sq[None]), axis=2)
    return float(np.sum(state.nu_z * (sq / (K * D * F) + usage / (K * F) + 1.0 / K)))


def elbo_inverse_sigma(state):
    """1/sigma maximizing the ELBO: average expected squared deviation per dimension."""
    T, D = state.T, state.D
    return float(np.sum(state.nu_z * expected_sq_dev(state)) / (T * D))


def update_sigma(state, data=None, h=None, rule="closed_form"):
    """Empirical-Bayes update of the task-noise precision.

    ``rule="closed_form"`` evaluates the closed-form ratio; ``rule="elbo"``
    uses the exact stationary point of the bound, which is what keeps the
    ELBO monotone inside :func:`~mfa_mtl.vi.fit.fit`.
    """
    if rule == "closed_form":
        inv = closed_form_inverse_sigma(state)
    elif rule == "elbo":
        inv = elbo_inverse_sigma(state)
    else:
        raise ValueError(f"unknown sigma rule {rule!r}; expected one of {SIGMA_RULES}")
    return state.evolve(sigma=1.0 / max(inv, 1e-12))


def update_xi(state, data):
    """Jaakkola-Jordan parameters: xi^2 = E_Q[(theta^T x)^2]."""
    if data.task_type is not TaskType.CLASSIFICATION:
        raise ValueError("xi is only defined for classification data")
    xi = tuple(np.sqrt((task.X @ state.nu_theta[t]) ** 2 + np.sum(task.X ** 2, axis=1))
               for t, task in enumerate(data.tasks))
    return state.evolve(xi=xi)
