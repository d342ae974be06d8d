"""Variational parameters, initialization and JSON serialization."""

from dataclasses import dataclass, fields, replace
import json

import numpy as np

from ..model import MultitaskDataset, TaskType
from ..singletask import RIDGE, ml_weights

STATE_FORMAT = "mfa_mtl.VariationalState"
STATE_VERSION = 1

# Scale of the seeded noise breaking the symmetry between components.
INIT_NOISE = 0.01

# Starting factor-usage probability. Starting high lets the unit-variance
# loadings of every factor inflate the expected deviation, which drags the
# noise precision down before any factor has earned its keep.
INIT_B = 0.01


@dataclass(frozen=True)
class VariationalState:
    """Parameters of the factorized approximation Q.

    Every Gaussian factor of Q has identity covariance, so only the means are
    stored. Shapes: ``nu_theta`` (T, D), ``nu_mu`` (F, D), ``nu_lambda``
    (F, D, K), ``nu_s`` and ``nu_b`` (T, F, K), ``nu_z`` (T, F), ``gamma``
    (F, 2), ``rho`` (F, K, 2). ``xi`` holds one array of Jaakkola-Jordan
    parameters per task for classification and is ``None`` for regression.
    """

    nu_theta: np.ndarray
    nu_mu: np.ndarray
    nu_lambda: np.ndarray
    nu_s: np.ndarray
    nu_b: np.ndarray
    nu_z: np.ndarray
    gamma: np.ndarray
    rho: np.ndarray
    sigma: float
    xi: tuple = None
    elbo_trace: tuple = ()

    @property
    def T(self):
        return self.nu_theta.shape[0]

    @property
    def D(self):
        return self.nu_theta.shape[1]

    @property
    def F(self):
        return self.nu_mu.shape[0]

    @property
    def K(self):
        return self.nu_lambda.shape[2]

    def evolve(self, **changes):
        return replace(self, **changes)

    def check(self, atol=1e-9):
        """Raise ``ValueError`` if a structural invariant is violated."""
        if self.nu_z.size and not np.allclose(self.nu_z.sum(axis=1), 1.0, rtol=0, atol=atol):
            raise ValueError("nu_z rows must sum to one")
        if np.any(self.nu_z < 0):
            raise ValueError("nu_z entries must be non-negative")
        if np.any((self.nu_b < 0) | (self.nu_b > 1)):
            raise ValueError("nu_b must lie in [0, 1]")
        if np.any(self.gamma <= 0) or np.any(self.rho <= 0) or not self.sigma > 0:
            raise ValueError("gamma, rho and sigma must be strictly positive")

    def mixing_mean(self):
        """nu_Lambda_f (nu_s * nu_b) for every (t, f): shape (T, F, D)."""
        return np.einsum("fdk,tfk->tfd", self.nu_lambda, self.nu_s * self.nu_b)

    # --- serialization -------------------------------------------------

    def to_dict(self):
        doc = {"format": STATE_FORMAT, "version": STATE_VERSION}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "sigma":
                doc["sigma"] = float(value)
            elif f.name == "xi":
                doc["xi"] = None if value is None else [_floats(v) for v in value]
            elif f.name == "elbo_trace":
                doc["elbo_trace"] = _floats(value)
            else:
                arr = np.asarray(value, dtype=float)
                doc[f.name] = {"shape": list(arr.shape), "data": _floats(arr.ravel())}
        return doc

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format") != STATE_FORMAT:
            raise ValueError(f"not a variational state document: format={doc.get('format')!r}")
        if doc.get("version") != STATE_VERSION:
            raise ValueError(f"unsupported state version {doc.get('version')!r}")
        kwargs = {}
        for f in fields(cls):
            if f.name not in doc:
                raise ValueError(f"state document is missing field {f.name!r}")
            value = doc[f.name]
            if f.name == "sigma":
                kwargs["sigma"] = float(value)
            elif f.name == "xi":
                kwargs["xi"] = None if value is None else tuple(
                    np.asarray(v, dtype=float) for v in value)
            elif f.name == "elbo_trace":
                kwargs["elbo_trace"] = tuple(float(v) for v in value)
            else:
                shape = tuple(int(n) for n in value["shape"])
                kwargs[f.name] = np.asarray(value["data"], dtype=float).reshape(shape)
        state = cls(**kwargs)
        state.check()
        return state

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _floats(values):
    # float repr is the shortest round-tripping decimal
    return [float(v) for v in np.asarray(values, dtype=float).ravel()]


def initial_xi(nu_theta, data):
    return tuple(np.abs(task.X @ nu_theta[t]) for t, task in enumerate(data.tasks))


def seed_means(nu_theta, F, rng):
    """k-means++ seeding of component means from the task weights.

    Rows are picked with probability proportional to their squared distance
    from the nearest mean chosen so far. Once every distinct row is taken the
    remaining components start at the average task weight.
    """
    T, D = nu_theta.shape
    means = np.tile(nu_theta.mean(axis=0), (F, 1))
    chosen = [int(rng.integers(T))]
    means[0] = nu_theta[chosen[0]]
    dist = np.sum((nu_theta - means[0]) ** 2, axis=1)
    for f in range(1, min(F, T)):
        total = dist.sum()
        if not total > 0:
            break
        idx = int(rng.choice(T, p=dist / total))
        chosen.append(idx)
        means[f] = nu_theta[idx]
        dist = np.minimum(dist, np.sum((nu_theta - means[f]) ** 2, axis=1))
    return means


def seed_factors(nu_theta, nu_mu, nu_lambda, K):
    """Principal-direction start for loadings and factor scores.

    Each task is attached to its nearest component mean; a component with at
    least two tasks gets its leading ``K`` principal directions of the
    attached deviations as loadings (scaled so the scores have unit variance)
    and the matching scores. Other entries keep their values (loadings) or
    start at zero (scores). With zero scores a factor can never be switched
    on by coordinate ascent, because the usage update only sees its cost.
    """
    T, F = nu_theta.shape[0], nu_mu.shape[0]
    nu_lambda = nu_lambda.copy()
    nu_s = np.zeros((T, F, K))
    if K == 0:
        return nu_lambda, nu_s
    nearest = np.argmin(((nu_theta[:, None, :] - nu_mu[None]) ** 2).sum(axis=2), axis=1)
    for f in range(F):
        idx = np.flatnonzero(nearest == f)
        if idx.size < 2:
            continue
        U, S, Vt = np.linalg.svd(nu_theta[idx] - nu_mu[f], full_matrices=False)
        r = min(K, S.size)
        nu_lambda[f, :, :r] = Vt[:r].T * (S[:r] / np.sqrt(idx.size))
        nu_s[idx, f, :r] = U[:, :r] * np.sqrt(idx.size)
    return nu_lambda, nu_s


def init_state(data: MultitaskDataset, h, ridge=RIDGE, b0=INIT_B):
    """Starting point for coordinate ascent.

    Task weights start at their penalized maximum-likelihood values
    (``ridge`` is the L2 penalty). Component means are k-means++ seeds drawn
    from those weights plus small seeded noise; loadings are small seeded
    noise, replaced by principal directions of the task weights around
    their nearest seed where possible (see :func:`seed_factors`);
    factor-usage probabilities start at ``b0``. Deterministic given
    ``h.seed``.
    """
    if data.T == 0:
        raise ValueError("cannot initialize on an empty dataset")
    if data.D == 0:
        raise ValueError("feature dimension must be positive")
    rng = np.random.default_rng(h.seed)
    T, D, F, K = data.T, data.D, h.F, h.K
    nu_theta = np.stack([ml_weights(task, data.task_type, ridge) for task in data.tasks])
    nu_mu = seed_means(nu_theta, F, rng) + INIT_NOISE * rng.standard_normal((F, D))
    nu_lambda = INIT_NOISE * rng.standard_normal((F, D, K))
    nu_lambda, nu_s = seed_factors(nu_theta, nu_mu, nu_lambda, K)
    gamma = np.tile([1.0, h.alpha1], (F, 1))
    rho = np.tile([h.alpha2 / K if K else 1.0, 1.0], (F, K, 1))
    xi = initial_xi(nu_theta, data) if data.task_type is TaskType.CLASSIFICATION else None
    return VariationalState(
        nu_theta=nu_theta,
        nu_mu=nu_mu,
        nu_lambda=nu_lambda,
        nu_s=nu_s,
        nu_b=np.full((T, F, K), b0),
        nu_z=np.full((T, F), 1.0 / F),
        gamma=gamma,
        rho=rho,
        sigma=1.0,
        xi=xi,
    )
