"""Domain types and the generative model over per-task weight vectors.

Each task weight vector is drawn from a truncated DP mixture of factor
analyzers whose factor usage follows a finite Beta-Bernoulli approximation
to the IBP:

    theta_t = mu_{z_t} + Lambda_{z_t} (s_t * b_t) + eps_t,  eps_t ~ N(0, I / sigma)

Throughout the package ``sigma`` is a *precision*: the conditional covariance
of a task weight vector around its factor analyzer is ``I / sigma``.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import expit, log_expit

LOG_2PI = float(np.log(2.0 * np.pi))


class TaskType(str, Enum):
    REGRESSION = "regression"
    CLASSIFICATION = "classification"


class DimensionError(ValueError):
    """Raised when array shapes or dimension arguments are inconsistent."""


@dataclass(frozen=True)
class TaskData:
    id: str
    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        Y = np.asarray(self.Y, dtype=float).reshape(-1)
        if X.ndim != 2:
            raise DimensionError(f"task {self.id!r}: X must be 2-D, got shape {X.shape}")
        if X.shape[0] != Y.shape[0]:
            raise DimensionError(
                f"task {self.id!r}: X has {X.shape[0]} rows but Y has {Y.shape[0]} entries")
        if not np.all(np.isfinite(X)):
            raise ValueError(f"task {self.id!r}: X contains non-finite values")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self):
        return self.X.shape[0]


@dataclass(frozen=True)
class MultitaskDataset:
    task_type: TaskType
    tasks: tuple
    D: int

    def __post_init__(self):
        object.__setattr__(self, "task_type", TaskType(self.task_type))
        object.__setattr__(self, "tasks", tuple(self.tasks))
        if self.D < 0:
            raise DimensionError("feature dimension must be non-negative")
        seen = set()
        for task in self.tasks:
            if task.X.shape[1] != self.D:
                raise DimensionError(
                    f"task {task.id!r} has {task.X.shape[1]} features, expected {self.D}")
            if task.id in seen:
                raise ValueError(f"duplicate task id {task.id!r}")
            seen.add(task.id)
            if self.task_type is TaskType.CLASSIFICATION:
                if not np.all((task.Y == 0) | (task.Y == 1)):
                    raise ValueError(f"task {task.id!r}: classification targets must be 0 or 1")
            elif not np.all(np.isfinite(task.Y)):
                raise ValueError(f"task {task.id!r}: regression targets must be finite")

    @property
    def T(self):
        return len(self.tasks)

    @property
    def task_ids(self):
        return [task.id for task in self.tasks]

    def index_of(self, task_id):
        for t, task in enumerate(self.tasks):
            if task.id == task_id:
                return t
        raise KeyError(f"unknown task id {task_id!r}")

    def __eq__(self, other):
        if not isinstance(other, MultitaskDataset):
            return NotImplemented
        if (self.task_type, self.D, self.task_ids) != (other.task_type, other.D, other.task_ids):
            return False
        return all(np.array_equal(a.X, b.X) and np.array_equal(a.Y, b.Y)
                   for a, b in zip(self.tasks, other.tasks))

    __hash__ = None


@dataclass(frozen=True)
class Hyperparameters:
    """Prior and schedule settings.

    ``F`` truncates the stick-breaking mixture, ``K`` the number of factors
    per analyzer. ``inner_tol`` is the relative ELBO change that ends the
    inner coordinate-ascent loop.
    """

    alpha1: float = 1.0
    alpha2: float = 5.0
    F: int = 1
    K: int = 0
    outer_iters: int = 3
    inner_tol: float = 1e-5
    seed: int = 0
    max_inner_cycles: int = 200

    def __post_init__(self):
        if not self.alpha1 > 0:
            raise ValueError("alpha1 must be positive")
        if not self.alpha2 > 0:
            raise ValueError("alpha2 must be positive")
        if int(self.F) != self.F or self.F < 1:
            raise ValueError("F must be a positive integer")
        if int(self.K) != self.K or self.K < 0:
            raise ValueError("K must be a non-negative integer")
        if self.outer_iters < 1:
            raise ValueError("outer_iters must be positive")
        if not self.inner_tol > 0:
            raise ValueError("inner_tol must be positive")

    @classmethod
    def default_for(cls, T, D, **overrides):
        """Truncation defaults: F = T, K = min(D, T)."""
        overrides.setdefault("F", max(int(T), 1))
        overrides.setdefault("K", min(int(D), int(T)))
        return cls(**overrides)


@dataclass(frozen=True)
class GenerativeDraw:
    theta: np.ndarray      # (T, D)
    mu: np.ndarray         # (F, D)
    Lambda: np.ndarray     # (F, D, K)
    s: np.ndarray          # (T, K)
    b: np.ndarray          # (T, K), 0/1
    z: np.ndarray          # (T,), 1-based component index
    phi: np.ndarray        # (F,)
    beta_pi: np.ndarray    # (F, K)
    sigma: float
    mixture_weights: np.ndarray = field(default=None)


def stick_breaking_weights(phi):
    """Mixture weights phi_i * prod_{j<i} (1 - phi_j)."""
    phi = np.asarray(phi, dtype=float)
    remaining = np.concatenate([[1.0], np.cumprod(1.0 - phi)[:-1]])
    return phi * remaining


def sample_prior(h, T, D, rng_seed, sigma=1.0):
    """Draw task weights and all latent variables from the truncated prior.

    The last stick is fixed to one so exactly ``F`` components carry mass.
    ``sigma`` is the precision of the task-level noise.
    """
    if T < 1 or D < 1:
        raise DimensionError(f"need T >= 1 and D >= 1, got T={T}, D={D}")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    rng = np.random.default_rng(rng_seed)
    F, K = h.F, h.K
    phi = rng.beta(1.0, h.alpha1, size=F)
    phi[-1] = 1.0
    weights = stick_breaking_weights(phi)
    z = rng.choice(F, size=T, p=weights / weights.sum()) + 1
    if K > 0:
        beta_pi = rng.beta(h.alpha2 / K, 1.0, size=(F, K))
    else:
        beta_pi = np.zeros((F, 0))
    mu = rng.standard_normal((F, D))
    Lambda = rng.standard_normal((F, D, K))
    s = rng.standard_normal((T, K))
    b = (rng.random((T, K)) < beta_pi[z - 1]).astype(float)
    eps = rng.standard_normal((T, D)) / np.sqrt(sigma)
    loadings = np.einsum("tdk,tk->td", Lambda[z - 1], s * b)
    theta = mu[z - 1] + loadings + eps
    return GenerativeDraw(theta=theta, mu=mu, Lambda=Lambda, s=s, b=b, z=z, phi=phi,
                          beta_pi=beta_pi, sigma=float(sigma), mixture_weights=weights)


def loglik_regression(theta, X, Y):
    """Unit-variance Gaussian log-likelihood of targets ``Y`` under weights ``theta``."""
    theta = np.asarray(theta, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float).reshape(-1)
    if X.shape[1] != theta.shape[0] or X.shape[0] != Y.shape[0]:
        raise DimensionError(
            f"shape mismatch: theta {theta.shape}, X {X.shape}, Y {Y.shape}")
    resid = Y - X @ theta
    return -0.5 * Y.shape[0] * LOG_2PI - 0.5 * float(resid @ resid)


def log_sigmoid(a):
    return log_expit(a)


def sigmoid(a):
    return expit(a)


def jj_lambda(xi):
    """tanh(xi / 2) / (4 xi), continuous at zero with value 1/8."""
    xi = np.abs(np.asarray(xi, dtype=float))
    safe = np.where(xi < 1e-6, 1.0, xi)
    lam = np.tanh(safe / 2.0) / (4.0 * safe)
    # series: 1/8 - xi^2 / 96
    lam = np.where(xi < 1e-6, 0.125 - xi * xi / 96.0, lam)
    return lam if lam.ndim else float(lam)


def jj_lower_bound(a, xi):
    """Jaakkola-Jordan quadratic lower bound on log sigmoid(a).

    Tight exactly when ``xi == |a|``.
    """
    a = np.asarray(a, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if np.any(xi < 0):
        raise ValueError("xi must be non-negative")
    out = log_expit(xi) + 0.5 * (a - xi) - jj_lambda(xi) * (a * a - xi * xi)
    return out if np.ndim(out) else float(out)
