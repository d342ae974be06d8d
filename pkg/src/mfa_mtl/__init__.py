"""Multitask learning with a nonparametric Bayesian mixture of factor analyzers.

Each task's weight vector is drawn from one of a countable mixture of factor
analyzers (stick-breaking prior over components, finite Beta-Bernoulli prior
over factors); inference is truncated mean-field variational Bayes.
"""

__version__ = "0.1.0"

from .model import (GenerativeDraw, Hyperparameters, MultitaskDataset, TaskData, TaskType,
                    sample_prior)
from .vi import VariationalState, fit, init_state, predict
from .baselines import fit_stl, learning_curve
from .data import gen_synthetic_clusters, gen_synthetic_groups_regression, load_dataset, save_dataset

__all__ = [
    "GenerativeDraw", "Hyperparameters", "MultitaskDataset", "TaskData", "TaskType",
    "VariationalState", "fit", "fit_stl", "gen_synthetic_clusters",
    "gen_synthetic_groups_regression", "init_state", "learning_curve", "load_dataset",
    "predict", "sample_prior", "save_dataset",
]
