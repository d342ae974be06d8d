"""Evaluation metrics and the fit report."""

from dataclasses import dataclass, field
import json

import numpy as np

from .model import TaskType


def mse(pred, truth):
    pred = np.asarray(pred, dtype=float).ravel()
    truth = np.asarray(truth, dtype=float).ravel()
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.size} predictions vs {truth.size} targets")
    if pred.size == 0:
        raise ValueError("mse of an empty vector is undefined")
    diff = pred - truth
    return float(np.mean(diff * diff))


def accuracy(pred_labels, truth_labels):
    pred = np.asarray(pred_labels, dtype=float).ravel()
    truth = np.asarray(truth_labels, dtype=float).ravel()
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.size} predictions vs {truth.size} labels")
    if pred.size == 0:
        raise ValueError("accuracy of an empty vector is undefined")
    for name, arr in (("predicted", pred), ("true", truth)):
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError(f"{name} labels must be 0 or 1")
    return float(np.mean(pred == truth))


def metric_name(task_type):
    return "accuracy" if TaskType(task_type) is TaskType.CLASSIFICATION else "mse"


def task_metric(task_type, weights, X, Y):
    """Score linear weights on one task's rows."""
    scores = X @ weights
    if TaskType(task_type) is TaskType.CLASSIFICATION:
        return accuracy((scores >= 0).astype(float), Y)
    return mse(scores, Y)


def per_task_metrics(task_type, weights, data):
    """Metric for every task with at least one row (NaN otherwise)."""
    out = []
    for t, task in enumerate(data.tasks):
        out.append(task_metric(task_type, weights[t], task.X, task.Y) if task.n else float("nan"))
    return out


def mean_over_tasks(values):
    """Unweighted mean over tasks, skipping tasks without rows."""
    values = np.asarray(values, dtype=float)
    finite = values[np.isfinite(values)]
    return float(np.mean(finite)) if finite.size else float("nan")


@dataclass
class FitReport:
    """Per-task metrics, ELBO trace and structure of one fit.

    ``wall_time_seconds`` is kept out of :meth:`to_dict` so that serialized
    reports are reproducible bit for bit.
    """

    metric: str
    per_task_metric: list
    elbo_trace: list
    structure: object
    wall_time_seconds: float = 0.0
    task_ids: list = field(default_factory=list)
    mean_metric: float = field(init=False)

    def __post_init__(self):
        self.mean_metric = mean_over_tasks(self.per_task_metric)

    def to_dict(self):
        return {
            "metric": self.metric,
            "task_ids": list(self.task_ids),
            "per_task_metric": [float(v) for v in self.per_task_metric],
            "mean_metric": float(self.mean_metric),
            "elbo_trace": [float(v) for v in self.elbo_trace],
            "structure": self.structure.to_dict(),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)
