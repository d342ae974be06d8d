import numpy as np
import pytest

from mfa_mtl.model import Hyperparameters, MultitaskDataset, TaskData, TaskType
from mfa_mtl.vi.state import VariationalState


def random_dataset(rng, T, D, task_type, n_range=(0, 7)):
    tasks = []
    for t in range(T):
        n = int(rng.integers(*n_range))
        X = rng.standard_normal((n, D))
        if task_type is TaskType.CLASSIFICATION:
            Y = (rng.random(n) < 0.5).astype(float)
        else:
            Y = rng.standard_normal(n)
        tasks.append(TaskData(f"t{t}", X, Y))
    return MultitaskDataset(task_type, tasks, D)


def random_state(rng, data, F, K):
    """A valid, deliberately non-stationary variational state."""
    T, D = data.T, data.D
    nu_z = rng.dirichlet(np.ones(F), size=T) if T else np.zeros((0, F))
    xi = None
    nu_theta = rng.standard_normal((T, D))
    if data.task_type is TaskType.CLASSIFICATION:
        xi = tuple(np.abs(task.X @ nu_theta[t]) + rng.random(task.n)
                   for t, task in enumerate(data.tasks))
    return VariationalState(
        nu_theta=nu_theta,
        nu_mu=rng.standard_normal((F, D)),
        nu_lambda=rng.standard_normal((F, D, K)),
        nu_s=rng.standard_normal((T, F, K)),
        nu_b=rng.uniform(0.05, 0.95, size=(T, F, K)),
        nu_z=nu_z,
        gamma=rng.uniform(0.5, 3.0, size=(F, 2)),
        rho=rng.uniform(0.5, 3.0, size=(F, K, 2)),
        sigma=float(rng.uniform(0.3, 2.0)),
        xi=xi,
    )


def random_instance(seed, max_T=8, max_D=6, max_F=4, max_K=3, task_type=None, n_range=(0, 7)):
    """(data, h, state) with sizes drawn uniformly up to the given caps."""
    rng = np.random.default_rng(seed)
    T = int(rng.integers(1, max_T + 1))
    D = int(rng.integers(1, max_D + 1))
    F = int(rng.integers(1, max_F + 1))
    K = int(rng.integers(0, max_K + 1))
    if task_type is None:
        task_type = TaskType.REGRESSION if rng.random() < 0.5 else TaskType.CLASSIFICATION
    data = random_dataset(rng, T, D, task_type, n_range)
    h = Hyperparameters(alpha1=float(rng.uniform(0.5, 3.0)), alpha2=float(rng.uniform(0.5, 6.0)),
                        F=F, K=K, seed=seed)
    return data, h, random_state(rng, data, F, K)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --- acceptance summary --------------------------------------------------------

ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL/SKIP line for an acceptance criterion; shown in the terminal summary."""
    lines = request.config.stash[ACCEPTANCE_KEY]

    def record(number, status, detail):
        line = f"[{status}] criterion {number}: {detail}"
        lines.append((number, line))
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines, key=lambda item: item[0]):
            terminalreporter.write_line(line)
