"""Penalized maximum-likelihood weights for a single task.

Shared by variational initialization and the independent-task baseline so the
two are bitwise identical.
"""

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, log_expit

from .model import TaskType

RIDGE = 0.1


def ridge_weights(X, Y, ridge=RIDGE):
    """Solve (X^T X + ridge I) w = X^T Y."""
    D = X.shape[1]
    A = X.T @ X + ridge * np.eye(D)
    return np.linalg.solve(A, X.T @ Y)


def logistic_weights(X, Y, ridge=RIDGE, maxiter=200):
    """L2-penalized logistic regression by Newton-CG.

    On separable data the penalized optimum has a large but finite norm;
    the iteration cap keeps the solve bounded and deterministic.
    """
    D = X.shape[1]
    sign = 2.0 * Y - 1.0

    def neg_obj(w):
        a = sign * (X @ w)
        val = -np.sum(log_expit(a)) + 0.5 * ridge * (w @ w)
        grad = -X.T @ (sign * expit(-a)) + ridge * w
        return val, grad

    def hessp(w, v):
        p = expit(X @ w)
        return X.T @ ((p * (1.0 - p)) * (X @ v)) + ridge * v

    res = minimize(neg_obj, np.zeros(D), jac=True, hessp=hessp, method="Newton-CG",
                   options={"xtol": 1e-10, "maxiter": maxiter})
    return res.x


def ml_weights(task, task_type, ridge=RIDGE):
    """Penalized ML weights for one task; zeros when the task has no rows."""
    D = task.X.shape[1]
    if task.n == 0:
        return np.zeros(D)
    if TaskType(task_type) is TaskType.CLASSIFICATION:
        return logistic_weights(task.X, task.Y, ridge)
    return ridge_weights(task.X, task.Y, ridge)
