import csv
import io

import mpmath
import numpy as np
import pytest

from mfa_mtl.baselines import (CURVE_FIELDS, comparison_rows, evaluate_weights, fit_stl,
                               learning_curve, rows_to_csv)
from mfa_mtl.data import gen_synthetic_clusters, gen_synthetic_groups_regression
from mfa_mtl.metrics import accuracy, mean_over_tasks, mse
from mfa_mtl.model import Hyperparameters, MultitaskDataset, TaskData, TaskType
from mfa_mtl.vi import fit

from conftest import random_dataset


# --- metrics ---------------------------------------------------------------------

def test_mse_examples():
    assert mse([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert mse([0.0, 0.0], [1.0, 1.0]) == 1.0


def test_mse_extended_precision(rng):
    a, b = rng.standard_normal(37), rng.standard_normal(37)
    with mpmath.workdps(50):
        ref = mpmath.fsum((mpmath.mpf(float(x)) - mpmath.mpf(float(y))) ** 2 for x, y in zip(a, b)) / 37
    assert mse(a, b) == pytest.approx(float(ref), rel=1e-12)


def test_mse_errors():
    with pytest.raises(ValueError):
        mse([1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        mse([], [])


def test_accuracy_examples():
    assert accuracy([0, 1, 1], [0, 1, 1]) == 1.0
    assert accuracy([0, 1, 1], [1, 0, 0]) == 0.0
    assert accuracy([0, 1, 1, 0], [0, 1, 0, 1]) == 0.5


def test_accuracy_errors():
    with pytest.raises(ValueError):
        accuracy([0, 1], [0])
    with pytest.raises(ValueError):
        accuracy([0, 2], [0, 1])
    with pytest.raises(ValueError):
        accuracy([], [])


def test_mean_skips_empty_tasks():
    assert mean_over_tasks([1.0, float("nan"), 3.0]) == 2.0
    assert np.isnan(mean_over_tasks([float("nan")]))


def test_report_mean_is_arithmetic_mean():
    rng = np.random.default_rng(0)
    data = random_dataset(rng, 4, 2, TaskType.REGRESSION, (1, 5))
    state, report = fit(data, Hyperparameters(F=2, K=1, outer_iters=1))
    assert report.mean_metric == pytest.approx(np.mean(report.per_task_metric), rel=1e-15)
    doc = report.to_dict()
    assert "wall_time_seconds" not in doc and doc["metric"] == "mse"


# --- STL -------------------------------------------------------------------------

def test_stl_matches_normal_equations(rng):
    X, Y = rng.standard_normal((40, 5)), rng.standard_normal(40)
    data = MultitaskDataset("regression", [TaskData("a", X, Y)], 5)
    w = fit_stl(data, ridge=1e-6)[0]
    np.testing.assert_allclose(w, np.linalg.solve(X.T @ X + 1e-6 * np.eye(5), X.T @ Y), atol=1e-8)


def test_stl_logistic_is_stationary(rng):
    X = rng.standard_normal((60, 3))
    Y = (rng.random(60) < 0.5).astype(float)
    data = MultitaskDataset("classification", [TaskData("a", X, Y)], 3)
    w = fit_stl(data)[0]
    p = 1.0 / (1.0 + np.exp(-X @ w))
    np.testing.assert_allclose(X.T @ (Y - p) - 0.1 * w, 0.0, atol=1e-7)


def test_stl_no_tasks():
    assert fit_stl(MultitaskDataset("regression", [], 4)).shape == (0, 4)


def test_stl_permutation_equivariant(rng):
    data = random_dataset(rng, 5, 3, TaskType.CLASSIFICATION, (2, 8))
    perm = rng.permutation(5)
    permuted = MultitaskDataset(data.task_type, [data.tasks[i] for i in perm], 3)
    assert np.array_equal(fit_stl(permuted), fit_stl(data)[perm])


def test_evaluate_weights():
    X = np.array([[1.0, 0.0], [0.0, 1.0]])
    data = MultitaskDataset("regression", [TaskData("a", X, [1.0, 1.0]), TaskData("b", X, [0.0, 0.0])], 2)
    values, mean = evaluate_weights(np.array([[1.0, 1.0], [1.0, 0.0]]), data)
    assert values == [0.0, 0.5] and mean == 0.25


# --- learning curve ----------------------------------------------------------------

@pytest.fixture(scope="module")
def groups():
    train, test, _, _ = gen_synthetic_groups_regression(seed=3, tasks_per_group=4)
    return train, test, Hyperparameters.default_for(train.T, train.D)


def test_curve_rows_and_order(groups):
    train, test, h = groups
    rows = learning_curve(train, h, [0.5, 1.0], [0, 1], test=test)
    assert len(rows) == 2 * 2 * 2
    keys = [(r["fraction"], r["seed"], r["method"]) for r in rows]
    assert keys == sorted(keys)
    assert all(r["metric"] == "mse" for r in rows)
    assert set(rows[0]) == set(CURVE_FIELDS)


def test_full_fraction_reproduces_plain_fit(groups):
    train, test, h = groups
    rows = learning_curve(train, h, [1.0], [7], test=test)
    state, _ = fit(train, h)
    assert rows[0]["value"] == evaluate_weights(state.nu_theta, test)[1]
    assert rows[1]["value"] == evaluate_weights(fit_stl(train), test)[1]


def test_curve_deterministic(groups):
    train, test, h = groups
    assert learning_curve(train, h, [0.4], [2], test) == learning_curve(train, h, [0.4], [2], test)


def test_curve_validation(groups):
    train, test, h = groups
    with pytest.raises(ValueError):
        learning_curve(train, h, [0.0], [0])
    other = MultitaskDataset(test.task_type, list(reversed(test.tasks)), test.D)
    with pytest.raises(ValueError):
        learning_curve(train, h, [1.0], [0], test=other)


def test_small_data_multitask_beats_stl():
    train, test, _, _ = gen_synthetic_clusters(seed=0)
    h = Hyperparameters.default_for(train.T, train.D)
    rows = learning_curve(train, h, [0.2], range(5), test=test)
    mfa = np.mean([r["value"] for r in rows if r["method"] == "mfa"])
    stl = np.mean([r["value"] for r in rows if r["method"] == "stl"])
    assert mfa >= stl


# --- tidy exports ------------------------------------------------------------------

def test_rows_to_csv_round_trips_floats():
    rows = [{"method": "mfa", "fraction": 0.1, "seed": 0, "metric": "mse", "value": 1 / 3}]
    parsed = list(csv.DictReader(io.StringIO(rows_to_csv(rows, CURVE_FIELDS))))
    assert float(parsed[0]["value"]) == 1 / 3 and parsed[0]["seed"] == "0"


def test_comparison_rows():
    rows = comparison_rows(["a", "b"], "accuracy", {"mfa": [1.0, 0.5], "stl": [0.5, 0.5]})
    assert len(rows) == 4
    assert rows[1] == {"method": "mfa", "task_id": "b", "metric": "accuracy", "value": 0.5}
