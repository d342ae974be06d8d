"""Latent task structure recovered by a fitted model."""

from dataclasses import dataclass, asdict
import csv
import io
import json

import numpy as np
from sklearn.metrics import adjusted_rand_score

SUMMARY_FORMAT = "mfa_mtl.StructureSummary"


@dataclass(frozen=True)
class StructureSummary:
    cluster_of_task: list
    occupied_components: int
    factor_usage: list
    effective_rank: list
    task_correlation: list
    constant_tasks: list

    def to_dict(self):
        return {"format": SUMMARY_FORMAT, **asdict(self)}

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format") != SUMMARY_FORMAT:
            raise ValueError("not a structure summary document")
        summary = cls(**{k: v for k, v in doc.items() if k != "format"})
        summary.validate()
        return summary

    def validate(self, atol=1e-9):
        T = len(self.cluster_of_task)
        F = len(self.effective_rank)
        corr = np.asarray(self.task_correlation, dtype=float).reshape(T, T)
        if not np.allclose(corr, corr.T, atol=atol) or not np.allclose(np.diag(corr), 1.0, atol=atol):
            raise ValueError("task correlation must be symmetric with unit diagonal")
        if np.any(np.abs(corr) > 1 + atol):
            raise ValueError("task correlations must lie in [-1, 1]")
        if not 0 <= self.occupied_components <= F:
            raise ValueError("occupied_components exceeds truncation level")
        usage = np.asarray(self.factor_usage, dtype=float)
        K = usage.shape[1] if usage.ndim == 2 else 0
        if any(r < 0 or r > K for r in self.effective_rank):
            raise ValueError("effective rank out of range")
        if any(not 0 <= c < F for c in self.cluster_of_task):
            raise ValueError("cluster label out of range")

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def cluster_assignments(state):
    """Most responsible component per task (0-based; ties go to the lowest index)."""
    return np.argmax(state.nu_z, axis=1)


def component_mass(state):
    return state.nu_z.sum(axis=0)


def occupied_components(state, threshold=1e-3):
    return int(np.sum(component_mass(state) > threshold))


def factor_usage(state):
    """Responsibility-weighted mean of nu_b per (component, factor)."""
    F, K = state.F, state.K
    mass = component_mass(state)
    weighted = np.einsum("tf,tfk->fk", state.nu_z, state.nu_b)
    safe = np.where(mass > 0, mass, 1.0)
    return np.where(mass[:, None] > 0, weighted / safe[:, None], 0.0).reshape(F, K)


def effective_rank(state, threshold=0.5):
    """Number of factors per component whose mean usage over its tasks exceeds ``threshold``.

    A task counts toward the component it is assigned to by
    :func:`cluster_assignments`; empty components get rank 0.
    """
    labels = cluster_assignments(state)
    ranks = np.zeros(state.F, dtype=int)
    for f in range(state.F):
        members = labels == f
        if state.K == 0 or not members.any():
            continue
        ranks[f] = int(np.sum(state.nu_b[members, f, :].mean(axis=0) > threshold))
    return ranks


def task_correlation(state):
    """Pearson correlation between task weight vectors.

    Returns the (T, T) matrix and a boolean mask of tasks whose weight vector
    is constant; their off-diagonal correlations are reported as 0.
    """
    theta = np.asarray(state.nu_theta, dtype=float)
    centered = theta - theta.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.sum(centered * centered, axis=1))
    constant = norms <= 1e-12 * np.maximum(1.0, np.abs(theta).max(axis=1, initial=0.0))
    unit = np.where(constant[:, None], 0.0, centered / np.where(constant, 1.0, norms)[:, None])
    corr = np.clip(unit @ unit.T, -1.0, 1.0)
    corr = 0.5 * (corr + corr.T)
    np.fill_diagonal(corr, 1.0)
    return corr, constant


def adjusted_rand_index(labels_a, labels_b):
    labels_a = np.asarray(labels_a)
    labels_b = np.asarray(labels_b)
    if labels_a.shape != labels_b.shape:
        raise ValueError(f"label vectors differ in length: {labels_a.shape} vs {labels_b.shape}")
    if labels_a.size < 2:
        raise ValueError("need at least two labels")
    return float(adjusted_rand_score(labels_a, labels_b))


def block_contrast(corr, labels):
    """Mean within-group minus mean between-group off-diagonal correlation."""
    labels = np.asarray(labels)
    same = labels[:, None] == labels[None, :]
    off = ~np.eye(len(labels), dtype=bool)
    return float(corr[same & off].mean() - corr[~same].mean())


def summarize(state, occupancy_threshold=1e-3, rank_threshold=0.5):
    corr, constant = task_correlation(state)
    return StructureSummary(
        cluster_of_task=[int(c) for c in cluster_assignments(state)],
        occupied_components=occupied_components(state, occupancy_threshold),
        factor_usage=factor_usage(state).tolist(),
        effective_rank=[int(r) for r in effective_rank(state, rank_threshold)],
        task_correlation=corr.tolist(),
        constant_tasks=[int(t) for t in np.flatnonzero(constant)],
    )


def correlation_csv(corr, task_ids):
    """Square CSV with task ids as header row and first column."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["task"] + list(task_ids))
    for tid, row in zip(task_ids, np.asarray(corr)):
        writer.writerow([tid] + [repr(float(v)) for v in row])
    return buf.getvalue()
