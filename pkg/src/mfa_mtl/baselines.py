"""Independent-task baseline, learning curves and tidy exports."""

import csv
import io

import numpy as np

from .data import split_fraction
from .metrics import mean_over_tasks, metric_name, per_task_metrics
from .singletask import RIDGE, ml_weights
from .vi.fit import fit

CURVE_FIELDS = ("method", "fraction", "seed", "metric", "value")
METHODS = ("mfa", "stl")


def fit_stl(data, h=None, ridge=RIDGE):
    """Per-task penalized ML weights, shape (T, D).

    Uses the same solver and penalty as the variational initialization, so
    the result equals ``init_state(data, h).nu_theta`` bit for bit. ``h`` is
    accepted for interface symmetry with :func:`fit` and ignored.
    """
    if data.T == 0:
        return np.zeros((0, data.D))
    return np.stack([ml_weights(task, data.task_type, ridge) for task in data.tasks])


def evaluate_weights(weights, data):
    """(per-task metrics, mean) of linear weights on ``data``."""
    values = per_task_metrics(data.task_type, weights, data)
    return values, mean_over_tasks(values)


def learning_curve(data, h, fractions, seeds, test=None):
    """Mean metric of both methods on subsampled training sets.

    For every fraction and seed, ``split_fraction(data, fraction, seed)`` is
    fitted with the multitask model (hyperparameters ``h`` unchanged, so its
    initialization seed is ``h.seed``) and with the independent baseline.
    Both are scored on ``test`` (default: the full ``data``). Rows are dicts
    with keys :data:`CURVE_FIELDS`, ordered by fraction, then seed, then
    method.
    """
    fractions = [float(f) for f in fractions]
    for f in fractions:
        if not 0 < f <= 1:
            raise ValueError(f"fraction {f} outside (0, 1]")
    test = data if test is None else test
    if test.task_ids != data.task_ids:
        raise ValueError("test set must list the same tasks as the training set")
    name = metric_name(data.task_type)
    rows = []
    for fraction in fractions:
        for seed in seeds:
            sub = split_fraction(data, fraction, int(seed))
            state, _ = fit(sub, h)
            scores = {"mfa": evaluate_weights(state.nu_theta, test)[1],
                      "stl": evaluate_weights(fit_stl(sub), test)[1]}
            for method in METHODS:
                rows.append({"method": method, "fraction": fraction, "seed": int(seed),
                             "metric": name, "value": scores[method]})
    return rows


def rows_to_csv(rows, fields):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def comparison_rows(task_ids, metric, per_method):
    """Tidy rows (one per task per method) from ``{method: per-task values}``."""
    rows = []
    for method, values in per_method.items():
        for tid, value in zip(task_ids, values):
            rows.append({"method": method, "task_id": tid, "metric": metric, "value": float(value)})
    return rows
