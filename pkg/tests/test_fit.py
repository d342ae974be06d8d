import importlib

import numpy as np
import pytest

from mfa_mtl.baselines import fit_stl
from mfa_mtl.data import gen_synthetic_groups_regression
from mfa_mtl.model import Hyperparameters, MultitaskDataset, TaskData, TaskType
from mfa_mtl.vi import ElboDecreaseError, fit, init_state, predict

from conftest import random_dataset

fit_module = importlib.import_module("mfa_mtl.vi.fit")


def _small_regression(seed=0, T=6, D=3):
    rng = np.random.default_rng(seed)
    return random_dataset(rng, T, D, TaskType.REGRESSION, n_range=(2, 9))


# --- init ------------------------------------------------------------------------

def test_identity_design_recovers_target():
    D = 4
    Y = np.eye(D)[0]
    data = MultitaskDataset(TaskType.REGRESSION, [TaskData("a", np.eye(D), Y)], D)
    state = init_state(data, Hyperparameters(F=2, K=1), ridge=1e-6)
    np.testing.assert_allclose(state.nu_theta[0], Y, atol=1e-4)


def test_init_responsibilities_uniform():
    data = _small_regression()
    state = init_state(data, Hyperparameters(F=4, K=2))
    assert np.all(state.nu_z == 0.25)
    state.check()


def test_init_fixed_fields():
    data = random_dataset(np.random.default_rng(1), 5, 3, TaskType.CLASSIFICATION, (1, 6))
    h = Hyperparameters(alpha1=1.5, alpha2=4.0, F=3, K=2)
    state = init_state(data, h)
    np.testing.assert_array_equal(state.gamma, np.tile([1.0, 1.5], (3, 1)))
    np.testing.assert_array_equal(state.rho, np.tile([2.0, 1.0], (3, 2, 1)))
    assert state.sigma == 1.0
    for t, task in enumerate(data.tasks):
        np.testing.assert_allclose(state.xi[t], np.abs(task.X @ state.nu_theta[t]), rtol=1e-15)


def test_init_underdetermined_task_is_finite(rng):
    X = rng.standard_normal((2, 6))
    data = MultitaskDataset(TaskType.REGRESSION, [TaskData("a", X, rng.standard_normal(2))], 6)
    state = init_state(data, Hyperparameters(F=1, K=1))
    assert np.all(np.isfinite(state.nu_theta))
    # penalized solution lies in the row space of X
    proj = X.T @ np.linalg.lstsq(X.T, state.nu_theta[0], rcond=None)[0]
    np.testing.assert_allclose(proj, state.nu_theta[0], atol=1e-10)


def test_init_rejects_empty():
    with pytest.raises(ValueError):
        init_state(MultitaskDataset(TaskType.REGRESSION, [], 3), Hyperparameters())


def test_init_deterministic_given_seed():
    data = _small_regression()
    h = Hyperparameters(F=3, K=2, seed=5)
    assert init_state(data, h).to_json() == init_state(data, h).to_json()
    other = Hyperparameters(F=3, K=2, seed=6)
    assert init_state(data, h).to_json() != init_state(data, other).to_json()


def test_stl_baseline_equals_initial_weights():
    data = random_dataset(np.random.default_rng(2), 6, 4, TaskType.CLASSIFICATION, (0, 9))
    h = Hyperparameters(F=2, K=1)
    assert np.array_equal(fit_stl(data, h), init_state(data, h).nu_theta)


# --- fit -------------------------------------------------------------------------

@pytest.mark.parametrize("task_type", [TaskType.REGRESSION, TaskType.CLASSIFICATION])
def test_trace_non_decreasing(task_type):
    for seed in range(4):
        data = random_dataset(np.random.default_rng(seed), 8, 3, task_type, (1, 12))
        state, report = fit(data, Hyperparameters(F=4, K=2, seed=seed))
        trace = np.array(report.elbo_trace)
        assert np.all(np.diff(trace) >= -1e-8 * np.abs(trace[:-1]))
        assert report.elbo_trace == list(state.elbo_trace)


def test_single_component_without_factors_is_shared_mean_hierarchy():
    data = _small_regression(3, T=7)
    state, _ = fit(data, Hyperparameters(F=1, K=0, inner_tol=1e-12))
    assert np.all(state.nu_z == 1.0)
    s = state.sigma
    expected = s * state.nu_theta.sum(axis=0) / (1.0 + s * state.T)
    np.testing.assert_allclose(state.nu_mu[0], expected, rtol=1e-6, atol=1e-9)


def test_fit_deterministic():
    data = _small_regression(4)
    h = Hyperparameters(F=3, K=2, seed=9)
    a, ra = fit(data, h)
    b, rb = fit(data, h)
    assert a.to_json() == b.to_json()
    assert ra.to_json() == rb.to_json()


def test_fit_groups_recovers_three_groups():
    train, test, groups, _ = gen_synthetic_groups_regression(seed=0)
    state, report = fit(train, Hyperparameters.default_for(train.T, train.D))
    assert report.structure.occupied_components == 3
    assert report.metric == "mse"
    assert len(report.per_task_metric) == train.T


def test_decrease_raises(monkeypatch):
    data = _small_regression(5)

    def bad_mu(state, data=None):
        return state.evolve(nu_mu=state.nu_mu + 10.0)

    monkeypatch.setattr(fit_module, "update_mu", bad_mu)
    with pytest.raises(ElboDecreaseError) as info:
        fit(data, Hyperparameters(F=2, K=1))
    err = info.value
    assert err.block == "mu" and err.after < err.before
    assert "mu_prior" in err.terms_after


def test_closed_form_sigma_rule_can_break_monotonicity():
    # the closed-form sigma ratio is not the exact coordinate maximizer
    data = _small_regression(6, T=8)
    with pytest.raises(ElboDecreaseError) as info:
        fit(data, Hyperparameters(F=2, K=2), sigma_rule="closed_form")
    assert info.value.block == "sigma"


# --- predict ---------------------------------------------------------------------

def _fitted(task_type):
    data = random_dataset(np.random.default_rng(7), 3, 4, task_type, (3, 8))
    state, _ = fit(data, Hyperparameters(F=2, K=1, outer_iters=1))
    return data, state


def test_predict_zero_row():
    _, state = _fitted(TaskType.REGRESSION)
    assert predict(state, np.zeros((1, 4)), 0, "regression")[0] == 0.0
    _, state = _fitted(TaskType.CLASSIFICATION)
    labels, prob = predict(state, np.zeros((2, 4)), 1, "classification")
    assert np.all(prob == 0.5) and np.all(labels == 1.0)


def test_predict_zero_weights():
    _, state = _fitted(TaskType.CLASSIFICATION)
    state = state.evolve(nu_theta=np.zeros_like(state.nu_theta))
    _, prob = predict(state, np.random.default_rng(0).standard_normal((5, 4)), 2, "classification")
    assert np.all(prob == 0.5)


def test_predict_matches_manual_dot_products(rng):
    _, state = _fitted(TaskType.REGRESSION)
    X = rng.standard_normal((6, 4))
    manual = [sum(X[i, d] * state.nu_theta[1, d] for d in range(4)) for i in range(6)]
    np.testing.assert_allclose(predict(state, X, 1, "regression"), manual, rtol=1e-12, atol=1e-12)


def test_predict_errors():
    _, state = _fitted(TaskType.REGRESSION)
    with pytest.raises(IndexError):
        predict(state, np.zeros((1, 4)), 3, "regression")
    with pytest.raises(ValueError):
        predict(state, np.zeros((1, 5)), 0, "regression")
