"""Dataset manifests, task CSV files, synthetic generators and subsampling.

A manifest is a JSON document::

    {"name": ..., "task_type": "regression" | "classification",
     "feature_dim": D,
     "tasks": [{"id": ..., "train_path": ..., "test_path": ...}, ...]}

Relative paths resolve against the manifest's directory. Each task CSV has
the header ``f0,...,f{D-1},y``.
"""

from dataclasses import dataclass
import csv
import json
import math
from pathlib import Path

import numpy as np
from scipy.special import expit

from .model import MultitaskDataset, TaskData, TaskType


class DataFormatError(ValueError):
    """Malformed manifest or task file."""


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    task_type: TaskType
    feature_dim: int
    tasks: tuple  # of dicts with id, train_path, test_path

    @classmethod
    def from_dict(cls, doc):
        try:
            tasks = tuple({"id": str(t["id"]), "train_path": str(t["train_path"]),
                           "test_path": str(t["test_path"])} for t in doc["tasks"])
            return cls(name=str(doc["name"]), task_type=TaskType(doc["task_type"]),
                       feature_dim=int(doc["feature_dim"]), tasks=tasks)
        except (KeyError, TypeError, ValueError) as exc:
            raise DataFormatError(f"invalid manifest: {exc}") from exc

    def to_dict(self):
        return {"name": self.name, "task_type": self.task_type.value,
                "feature_dim": self.feature_dim, "tasks": [dict(t) for t in self.tasks]}


def read_task_csv(path, feature_dim, task_type):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"task file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataFormatError(f"{path}: empty file (missing header)")
    expected = [f"f{j}" for j in range(feature_dim)] + ["y"]
    if rows[0] != expected:
        raise DataFormatError(
            f"{path}: header has {len(rows[0])} columns, expected {len(expected)} ({','.join(expected[:3])},...,y)")
    X = np.empty((len(rows) - 1, feature_dim))
    Y = np.empty(len(rows) - 1)
    for i, row in enumerate(rows[1:]):
        line = i + 2
        if len(row) != feature_dim + 1:
            raise DataFormatError(f"{path}: line {line} has {len(row)} columns, expected {feature_dim + 1}")
        for j, cell in enumerate(row):
            try:
                value = float(cell)
            except ValueError:
                raise DataFormatError(f"{path}: line {line}, column {j + 1}: non-numeric value {cell!r}") from None
            if not math.isfinite(value):
                raise DataFormatError(f"{path}: line {line}, column {j + 1}: non-finite value {cell!r}")
            if j < feature_dim:
                X[i, j] = value
            else:
                Y[i] = value
        if TaskType(task_type) is TaskType.CLASSIFICATION and Y[i] not in (0.0, 1.0):
            raise DataFormatError(
                f"{path}: line {line}, column {feature_dim + 1}: label {row[-1]!r} is not 0 or 1")
    return X, Y


def write_task_csv(path, X, Y):
    D = X.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"f{j}" for j in range(D)] + ["y"])
        for x, y in zip(X, Y):
            writer.writerow([repr(float(v)) for v in x] + [repr(float(y))])


def load_dataset(manifest_path):
    """Read a manifest and its task files into ``(train, test)`` datasets."""
    manifest_path = Path(manifest_path)
    try:
        doc = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{manifest_path}: not valid JSON ({exc})") from exc
    manifest = DatasetManifest.from_dict(doc)
    base = manifest_path.parent
    train, test = [], []
    for entry in manifest.tasks:
        for key, bucket in (("train_path", train), ("test_path", test)):
            X, Y = read_task_csv(base / entry[key], manifest.feature_dim, manifest.task_type)
            bucket.append(TaskData(entry["id"], X, Y))
    return (MultitaskDataset(manifest.task_type, train, manifest.feature_dim),
            MultitaskDataset(manifest.task_type, test, manifest.feature_dim))


def save_dataset(out_dir, name, train, test):
    """Write CSVs and a manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if train.task_ids != test.task_ids:
        raise ValueError("train and test must list the same tasks in the same order")
    entries = []
    for tr, te in zip(train.tasks, test.tasks):
        train_name, test_name = f"{tr.id}_train.csv", f"{tr.id}_test.csv"
        write_task_csv(out_dir / train_name, tr.X, tr.Y)
        write_task_csv(out_dir / test_name, te.X, te.Y)
        entries.append({"id": tr.id, "train_path": train_name, "test_path": test_name})
    manifest = DatasetManifest(name, train.task_type, train.D, tuple(entries))
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest.to_dict(), indent=2) + "\n", encoding="utf-8")
    return path


@dataclass(frozen=True)
class Scaling:
    """Per-feature standardization fitted on the pooled training rows."""

    mean: np.ndarray
    sd: np.ndarray

    @classmethod
    def fit(cls, train):
        rows = [t.X for t in train.tasks if t.n]
        if not rows:
            return cls(np.zeros(train.D), np.ones(train.D))
        pooled = np.vstack(rows)
        sd = pooled.std(axis=0)
        return cls(pooled.mean(axis=0), np.where(sd > 0, sd, 1.0))

    def apply(self, data):
        tasks = [TaskData(t.id, (t.X - self.mean) / self.sd, t.Y) for t in data.tasks]
        return MultitaskDataset(data.task_type, tasks, data.D)

    def to_dict(self):
        return {"mean": [float(v) for v in self.mean], "sd": [float(v) for v in self.sd]}

    @classmethod
    def from_dict(cls, doc):
        return cls(np.asarray(doc["mean"], dtype=float), np.asarray(doc["sd"], dtype=float))


def standardize(train, test):
    """Scale both splits by the pooled training mean and standard deviation."""
    scaling = Scaling.fit(train)
    return scaling.apply(train), scaling.apply(test)


# --- synthetic generators ------------------------------------------------

def _split(X, Y, n_train):
    return (X[:n_train], Y[:n_train]), (X[n_train:], Y[n_train:])


def gen_synthetic_clusters(seed, n_clusters=5, tasks_per_cluster=10, n_examples=100, D=20,
                           center_scale=4.0, noise_scale=0.3, feature_scale=None,
                           train_fraction=0.5):
    """Clustered binary classification tasks.

    Cluster centers have i.i.d. N(0, ``center_scale``^2) coordinates and each
    task adds N(0, ``noise_scale``^2) per coordinate. Features are Gaussian
    with standard deviation ``feature_scale`` (default ``1/sqrt(D)``, so that
    ``theta^T x`` has standard deviation close to ``center_scale``); labels
    are Bernoulli(sigmoid(theta^T x)). A task whose empirical positive rate
    falls outside (0.05, 0.95) is redrawn from the same seed stream.

    Returns ``(train, test, true_labels, true_theta)``.
    """
    if feature_scale is None:
        feature_scale = 1.0 / np.sqrt(D)
    rng = np.random.default_rng(seed)
    T = n_clusters * tasks_per_cluster
    centers = center_scale * rng.standard_normal((n_clusters, D))
    labels = np.repeat(np.arange(n_clusters), tasks_per_cluster)
    theta = centers[labels] + noise_scale * rng.standard_normal((T, D))
    n_train = int(round(train_fraction * n_examples))
    train, test = [], []
    for t in range(T):
        while True:
            X = feature_scale * rng.standard_normal((n_examples, D))
            Y = (rng.random(n_examples) < expit(X @ theta[t])).astype(float)
            if 0.05 < Y.mean() < 0.95:
                break
        (Xtr, Ytr), (Xte, Yte) = _split(X, Y, n_train)
        tid = f"task{t:02d}"
        train.append(TaskData(tid, Xtr, Ytr))
        test.append(TaskData(tid, Xte, Yte))
    kind = TaskType.CLASSIFICATION
    return MultitaskDataset(kind, train, D), MultitaskDataset(kind, test, D), labels, theta


def gen_synthetic_groups_regression(seed, n_groups=3, tasks_per_group=10, D=20, rank=4,
                                    n_train=15, n_test=50, mean_scale=4.0, noise_sd=0.5):
    """Regression tasks in groups that share a low-dimensional weight subspace.

    Group g owns a block of ``rank`` features (disjoint across groups); its
    task weights are ``U_g (c_g + w_t)`` with ``U_g`` an orthonormal basis of
    the block, a group offset ``c_g`` in a uniformly random direction with
    norm ``mean_scale * sqrt(rank)`` (fixed so that no group lands near the
    origin by chance) and standard Gaussian ``w_t``. Targets carry N(0, ``noise_sd``^2) noise.

    Returns ``(train, test, true_groups, true_theta)``.
    """
    if n_groups * rank > D:
        raise ValueError("groups need n_groups * rank <= D disjoint features")
    rng = np.random.default_rng(seed)
    T = n_groups * tasks_per_group
    groups = np.repeat(np.arange(n_groups), tasks_per_group)
    theta = np.zeros((T, D))
    for g in range(n_groups):
        block = slice(g * rank, (g + 1) * rank)
        basis, _ = np.linalg.qr(rng.standard_normal((rank, rank)))
        direction = rng.standard_normal(rank)
        offset = mean_scale * np.sqrt(rank) * direction / np.linalg.norm(direction)
        members = np.flatnonzero(groups == g)
        coeffs = offset + rng.standard_normal((members.size, rank))
        theta[members, block] = coeffs @ basis.T
    train, test = [], []
    for t in range(T):
        X = rng.standard_normal((n_train + n_test, D))
        Y = X @ theta[t] + noise_sd * rng.standard_normal(n_train + n_test)
        (Xtr, Ytr), (Xte, Yte) = _split(X, Y, n_train)
        tid = f"task{t:02d}"
        train.append(TaskData(tid, Xtr, Ytr))
        test.append(TaskData(tid, Xte, Yte))
    kind = TaskType.REGRESSION
    return MultitaskDataset(kind, train, D), MultitaskDataset(kind, test, D), groups, theta


def split_fraction(data, fraction, seed):
    """Subsample round(fraction * N_t) rows per task (at least one), without replacement.

    Selected rows keep their original order; ``fraction == 1`` returns the
    data unchanged.
    """
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    if fraction == 1:
        return data
    rng = np.random.default_rng(seed)
    tasks = []
    for task in data.tasks:
        if task.n < 1:
            raise ValueError(f"task {task.id!r} has no rows to subsample")
        keep = max(1, int(round(fraction * task.n)))
        idx = np.sort(rng.choice(task.n, size=keep, replace=False))
        tasks.append(TaskData(task.id, task.X[idx], task.Y[idx]))
    return MultitaskDataset(data.task_type, tasks, data.D)
