"""Coordinate-ascent schedule, monotonicity guard, and prediction."""

import logging
import time

import numpy as np
from scipy.special import expit

from ..metrics import FitReport, metric_name, per_task_metrics
from ..model import TaskType
from ..structure import summarize
from .elbo import elbo, elbo_terms
from .state import init_state
from .theta import optimize_all_thetas
from .updates import (update_b, update_gamma, update_lambda, update_mu, update_rho,
                      update_s, update_sigma, update_xi, update_z)

log = logging.getLogger(__name__)

MONOTONE_RTOL = 1e-8


class ElboDecreaseError(ArithmeticError):
    """A coordinate update lowered the ELBO beyond tolerance."""

    def __init__(self, block, before, after, terms_before, terms_after):
        self.block = block
        self.before = before
        self.after = after
        self.terms_before = terms_before
        self.terms_after = terms_after
        deltas = {k: terms_after[k] - terms_before[k] for k in terms_before}
        worst = sorted(deltas.items(), key=lambda kv: kv[1])[:3]
        detail = ", ".join(f"{k}: {v:+.3e}" for k, v in worst)
        super().__init__(f"ELBO decreased in block {block!r}: {before:.10g} -> {after:.10g} ({detail})")


def inner_blocks(task_type, sigma_rule="elbo"):
    """Ordered (name, update) pairs for one inner cycle."""
    blocks = [
        ("gamma", lambda s, d, h: update_gamma(s, h)),
        ("z", lambda s, d, h: update_z(s, d, h)),
        ("rho", lambda s, d, h: update_rho(s, h)),
        ("b", lambda s, d, h: update_b(s, d)),
        ("s", lambda s, d, h: update_s(s, d)),
        ("lambda", lambda s, d, h: update_lambda(s, d)),
        ("mu", lambda s, d, h: update_mu(s, d)),
        ("sigma", lambda s, d, h: update_sigma(s, d, h, rule=sigma_rule)),
    ]
    if TaskType(task_type) is TaskType.CLASSIFICATION:
        blocks.append(("xi", lambda s, d, h: update_xi(s, d)))
    return blocks


class _Tracker:
    """Evaluates the ELBO after each block and enforces monotonicity."""

    def __init__(self, data, h, state):
        self.data = data
        self.h = h
        self.value = elbo(state, data, h)
        self.trace = [self.value]

    def step(self, name, before_state, after_state):
        value = elbo(after_state, self.data, self.h)
        if value < self.value - MONOTONE_RTOL * abs(self.value):
            raise ElboDecreaseError(name, self.value, value,
                                    elbo_terms(before_state, self.data, self.h),
                                    elbo_terms(after_state, self.data, self.h))
        self.value = value
        self.trace.append(value)
        return after_state


def _inner_loop(state, data, h, tracker, blocks):
    for cycle in range(h.max_inner_cycles):
        start = tracker.value
        for name, update in blocks:
            state = tracker.step(name, state, update(state, data, h))
        change = abs(tracker.value - start) / max(abs(start), 1e-300)
        if change < h.inner_tol:
            return state, cycle + 1
    log.warning("inner loop hit the cycle cap (%d) before converging", h.max_inner_cycles)
    return state, h.max_inner_cycles


def fit(data, h, sigma_rule="elbo", state=None):
    """Fit the variational approximation and score it on the training data.

    Runs ``h.outer_iters`` rounds of (inner coordinate ascent to relative ELBO
    change ``h.inner_tol``, then a quasi-Newton update of every task weight),
    followed by one last inner loop so the non-weight parameters are
    consistent with the final weights.

    Returns ``(state, report)``; ``state.elbo_trace`` holds the ELBO after
    every block.
    """
    started = time.perf_counter()
    if state is None:
        state = init_state(data, h)
    blocks = inner_blocks(data.task_type, sigma_rule)
    tracker = _Tracker(data, h, state)
    for it in range(h.outer_iters):
        state, cycles = _inner_loop(state, data, h, tracker, blocks)
        log.info("outer %d: inner loop converged after %d cycles, ELBO %.6f", it, cycles, tracker.value)
        state = tracker.step("theta", state, optimize_all_thetas(state, data))
    state, _ = _inner_loop(state, data, h, tracker, blocks)
    state = state.evolve(elbo_trace=tuple(tracker.trace))
    report = make_report(state, data, wall_time=time.perf_counter() - started)
    return state, report


def make_report(state, data, wall_time=0.0):
    values = per_task_metrics(data.task_type, state.nu_theta, data)
    return FitReport(
        metric=metric_name(data.task_type),
        per_task_metric=values,
        elbo_trace=list(state.elbo_trace),
        structure=summarize(state),
        wall_time_seconds=wall_time,
        task_ids=data.task_ids,
    )


def predict(state, X_new, t, task_type):
    """Point predictions from the mean task weights.

    Regression returns ``X_new @ nu_theta_t``. Classification returns
    ``(labels, probabilities)`` with labels thresholded at 0.5.
    """
    if not 0 <= t < state.T:
        raise IndexError(f"task index {t} out of range for {state.T} tasks")
    X_new = np.atleast_2d(np.asarray(X_new, dtype=float))
    if X_new.shape[1] != state.D:
        raise ValueError(f"expected {state.D} features, got {X_new.shape[1]}")
    scores = X_new @ state.nu_theta[t]
    if TaskType(task_type) is TaskType.CLASSIFICATION:
        prob = expit(scores)
        return (prob >= 0.5).astype(float), prob
    return scores
