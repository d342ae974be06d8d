"""Task-weight block: ELBO gradient in nu_theta_t and its quasi-Newton maximization."""

import warnings

import numpy as np
from scipy.optimize import minimize
from scipy.special import log_expit

from ..model import TaskType, jj_lambda


class ThetaConvergenceWarning(RuntimeWarning):
    pass


def prior_target(state, t):
    """Responsibility-weighted mean of nu_mu_f + nu_Lambda_f (nu_s * nu_b)."""
    means = state.nu_mu + np.einsum("fdk,fk->fd", state.nu_lambda,
                                    state.nu_s[t] * state.nu_b[t])
    return state.nu_z[t] @ means


def _check_task(state, t):
    if not 0 <= t < state.T:
        raise IndexError(f"task index {t} out of range for {state.T} tasks")


def _task_objective(state, data, t):
    """ELBO restricted to the terms depending on nu_theta_t, with gradient."""
    task = data.tasks[t]
    sigma = state.sigma
    target = prior_target(state, t)
    X, Y = task.X, task.Y
    classification = data.task_type is TaskType.CLASSIFICATION
    if classification:
        xi = state.xi[t]
        lam = jj_lambda(xi)
        half_sign = Y - 0.5
        x_sq = np.sum(X * X, axis=1)
        const = np.sum(log_expit(xi) - 0.5 * xi - lam * (x_sq - xi * xi))

    def value_and_grad(theta):
        dev = theta - target
        val = -0.5 * sigma * (dev @ dev)
        grad = -sigma * dev
        if task.n:
            m = X @ theta
            if classification:
                val += const + np.sum(half_sign * m - lam * m * m)
                grad += X.T @ (half_sign - 2.0 * lam * m)
            else:
                resid = Y - m
                val += -0.5 * (resid @ resid)
                grad += X.T @ resid
        return val, grad

    return value_and_grad


def theta_gradient(state, data, t):
    """Ascent direction of the ELBO with respect to nu_theta_t.

    The prior coupling enters as ``-sigma * sum_f nu_z[t, f] (nu_theta_t - m_tf)``.
    For classification each observation's curvature is scaled by
    ``2 * lambda(xi_ti)``.
    """
    _check_task(state, t)
    return _task_objective(state, data, t)(state.nu_theta[t])[1]


def optimize_theta(state, data, t, gtol=1e-10, maxiter=1000):
    """Maximize the ELBO over nu_theta_t with L-BFGS-B, warm-started.

    Never returns a point with a lower bound than the starting value; if the
    optimizer stops early a :class:`ThetaConvergenceWarning` is issued and the
    best iterate is kept.
    """
    _check_task(state, t)
    objective = _task_objective(state, data, t)
    start = state.nu_theta[t].copy()
    start_val, _ = objective(start)

    def neg(theta):
        val, grad = objective(theta)
        return -val, -grad

    res = minimize(neg, start, jac=True, method="L-BFGS-B",
                   options={"gtol": gtol, "ftol": 1e-15, "maxiter": maxiter, "maxcor": 20})
    best = res.x
    if -res.fun < start_val:
        best = start
    if not res.success:
        gnorm = np.max(np.abs(objective(best)[1]))
        if gnorm > max(gtol, 1e-6) * max(1.0, abs(start_val)):
            warnings.warn(f"task {t}: theta optimizer stopped early ({res.message}); "
                          f"keeping best iterate", ThetaConvergenceWarning, stacklevel=2)
    nu_theta = state.nu_theta.copy()
    nu_theta[t] = best
    return state.evolve(nu_theta=nu_theta)


def optimize_all_thetas(state, data, **kwargs):
    for t in range(state.T):
        state = optimize_theta(state, data, t, **kwargs)
    return state
