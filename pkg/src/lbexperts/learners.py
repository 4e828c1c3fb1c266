"""Exponential-weights learners for lower-bounded loss feedback.

All learners share one transition: observe feedback, add an estimated loss
vector to the estimated cumulative losses, and emit the exponential-weights
distribution over the new totals. They differ only in the estimator.

The estimators accept either a single round (``chosen`` an int, ``p`` of
shape ``(N,)``) or a batch of independent replicates (``chosen`` of shape
``(R,)``, ``p`` of shape ``(R, N)``), so the same arithmetic drives both the
step-by-step episode runner and the vectorized Monte Carlo engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from .core import BOUND_ATOL, FullFeedback, ProbabilityVector, RoundFeedback, distribution_from_cumloss
from .quantities import tune_eta, unknown_horizon_round_terms

__all__ = [
    "ALGORITHMS",
    "LearnerState",
    "DoublingState",
    "make_learner",
    "make_doubling",
    "exp3_estimate",
    "exp3lb_estimate",
    "exp3alpha_estimate",
    "exp3ub_alphas",
    "correction_factor",
    "exp3lbp_estimate",
    "estimate",
    "learner_step",
    "hedge_step",
    "doubling_step",
    "default_initial_guess",
    "grow_guess",
    "doubling_schedule",
]

ALGORITHMS = ("hedge", "exp3", "exp3lb", "exp3alpha", "exp3ub", "exp3lbp")


def _at(arr: np.ndarray, chosen: np.ndarray) -> np.ndarray:
    return np.take_along_axis(arr, chosen[..., None], axis=-1)[..., 0]


def _replace_at(base, shape, chosen: np.ndarray, value: np.ndarray) -> np.ndarray:
    out = np.array(np.broadcast_to(base, shape), dtype=float)
    np.put_along_axis(out, chosen[..., None], np.asarray(value, dtype=float)[..., None], axis=-1)
    return out


def _prepare(chosen, chosen_loss, p):
    p = np.asarray(p, dtype=float)
    chosen = np.asarray(chosen, dtype=np.intp)
    chosen_loss = np.asarray(chosen_loss, dtype=float)
    return chosen, chosen_loss, p, _at(p, chosen)


def exp3_estimate(chosen, chosen_loss, p) -> np.ndarray:
    """Importance-weighted loss: chosen_loss / p at the chosen index, zero elsewhere."""
    chosen, loss, p, p_ch = _prepare(chosen, chosen_loss, p)
    return _replace_at(0.0, p.shape, chosen, loss / p_ch)


def exp3lb_estimate(chosen, chosen_loss, lower_bounds, p) -> np.ndarray:
    """Lower bounds everywhere, plus the importance-weighted slack at the chosen index."""
    chosen, loss, p, p_ch = _prepare(chosen, chosen_loss, p)
    lam = np.broadcast_to(np.asarray(lower_bounds, dtype=float), p.shape)
    lam_ch = _at(lam, chosen)
    slack = loss - lam_ch
    if np.any(slack < -BOUND_ATOL):
        raise ValueError("observed slack is negative: lower bound exceeds the chosen loss")
    slack = np.maximum(slack, 0.0)
    return _replace_at(lam, p.shape, chosen, lam_ch + slack / p_ch)


def exp3alpha_estimate(chosen, chosen_loss, alphas, p) -> np.ndarray:
    """Shift-corrected estimate ((l - alpha)/p)·1[chosen] + alpha for arbitrary alpha <= l."""
    chosen, loss, p, p_ch = _prepare(chosen, chosen_loss, p)
    alpha = np.broadcast_to(np.asarray(alphas, dtype=float), p.shape)
    alpha_ch = _at(alpha, chosen)
    gap = loss - alpha_ch
    if np.any(gap < -BOUND_ATOL):
        raise ValueError("alpha of the chosen expert exceeds its loss")
    gap = np.maximum(gap, 0.0)
    return _replace_at(alpha, p.shape, chosen, alpha_ch + gap / p_ch)


def exp3ub_alphas(upper_bounds, slack_cap) -> np.ndarray:
    """Turn upper bounds into valid shifts: upper bound minus the round's slack cap."""
    return np.asarray(upper_bounds, dtype=float) - slack_cap


def correction_factor(p, beta_s):
    """Shrinkage x applied to the chosen expert's importance-weighted slack.

    ``x = a(1-p) / (p(1-a) + a(1-p))`` with ``a = beta * slack``. At p = 1 the
    formula is 0/0 only when a = 1, where x = 1 (the a = 1 convention);
    otherwise p = 1 gives x = 0.
    """
    p = np.asarray(p, dtype=float)
    a = np.asarray(beta_s, dtype=float)
    if np.any(a < 0) or np.any(a > 1 + BOUND_ATOL):
        raise ValueError("beta * slack must lie in [0, 1]")
    a = np.minimum(a, 1.0)
    num = a * (1 - p)
    den = p * (1 - a) + a * (1 - p)
    with np.errstate(invalid="ignore", divide="ignore"):
        x = np.where(den > 0, num / den, 1.0)
    return float(x) if x.ndim == 0 else x


def exp3lbp_estimate(chosen, chosen_loss, lower_bounds, p, beta: float) -> np.ndarray:
    """Lower bounds plus the corrected slack s(1-x)/p at the chosen index."""
    chosen, loss, p, p_ch = _prepare(chosen, chosen_loss, p)
    lam = np.broadcast_to(np.asarray(lower_bounds, dtype=float), p.shape)
    lam_ch = _at(lam, chosen)
    slack = loss - lam_ch
    if np.any(slack < -BOUND_ATOL):
        raise ValueError("observed slack is negative: lower bound exceeds the chosen loss")
    slack = np.maximum(slack, 0.0)
    if np.any(beta * slack > 1 + BOUND_ATOL):
        raise ValueError(f"beta * slack exceeds 1 (beta={beta!r}, slack={np.max(slack)!r})")
    x = correction_factor(p_ch, beta * slack)
    return _replace_at(lam, p.shape, chosen, lam_ch + slack * (1 - x) / p_ch)


def estimate(
    algorithm: str,
    p,
    chosen,
    chosen_loss,
    *,
    losses=None,
    lower_bounds=None,
    upper_bounds=None,
    slack_cap=None,
    beta: float = 0.0,
) -> np.ndarray:
    """Dispatch to the estimator of ``algorithm``."""
    if algorithm == "hedge":
        if losses is None:
            raise ValueError("hedge needs the full loss vector")
        return np.array(np.broadcast_to(np.asarray(losses, dtype=float), np.shape(p)))
    if algorithm == "exp3":
        return exp3_estimate(chosen, chosen_loss, p)
    if algorithm == "exp3ub":
        if upper_bounds is None or slack_cap is None:
            raise ValueError("exp3ub needs upper bounds and a slack cap")
        return exp3alpha_estimate(chosen, chosen_loss, exp3ub_alphas(upper_bounds, slack_cap), p)
    if lower_bounds is None:
        raise ValueError(f"{algorithm} needs lower-bound feedback")
    if algorithm == "exp3lb":
        return exp3lb_estimate(chosen, chosen_loss, lower_bounds, p)
    if algorithm == "exp3alpha":
        return exp3alpha_estimate(chosen, chosen_loss, lower_bounds, p)
    if algorithm == "exp3lbp":
        return exp3lbp_estimate(chosen, chosen_loss, lower_bounds, p, beta)
    raise ValueError(f"unknown algorithm {algorithm!r}")


# ---------------------------------------------------------------------------
# Step interface
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LearnerState:
    algorithm: str
    eta: float
    cum_est_losses: np.ndarray
    beta: float = 0.0
    round: int = 0

    @property
    def num_experts(self) -> int:
        return self.cum_est_losses.shape[-1]

    def distribution(self) -> ProbabilityVector:
        return distribution_from_cumloss(self.eta, self.cum_est_losses)


def make_learner(algorithm: str, num_experts: int, eta: float, beta: float = 0.0) -> LearnerState:
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta!r}")
    if beta < 0 or (beta > 0 and algorithm != "exp3lbp"):
        raise ValueError("beta must be nonnegative and is only used by exp3lbp")
    return LearnerState(algorithm, float(eta), np.zeros(num_experts), float(beta))


def learner_step(
    state: LearnerState, feedback: Union[RoundFeedback, FullFeedback]
) -> tuple[LearnerState, ProbabilityVector]:
    """Fold one round of feedback into the state; return it with the next distribution."""
    if (state.algorithm == "hedge") != isinstance(feedback, FullFeedback):
        raise ValueError(f"{state.algorithm} cannot consume {type(feedback).__name__}")
    p = state.distribution().weights
    if isinstance(feedback, FullFeedback):
        est = estimate("hedge", p, feedback.chosen, feedback.chosen_loss, losses=feedback.losses)
    else:
        est = estimate(
            state.algorithm,
            p,
            feedback.chosen,
            feedback.chosen_loss,
            lower_bounds=feedback.lower_bounds,
            upper_bounds=feedback.upper_bounds,
            slack_cap=feedback.slack_cap,
            beta=state.beta,
        )
    if not np.all(np.isfinite(est)):
        raise FloatingPointError("non-finite estimated loss")
    new = replace(state, cum_est_losses=state.cum_est_losses + est, round=state.round + 1)
    return new, new.distribution()


def hedge_step(state: LearnerState, losses) -> tuple[LearnerState, ProbabilityVector]:
    """Full-information update with the true loss vector."""
    return learner_step(state, FullFeedback(0, np.asarray(losses, dtype=float)))


# ---------------------------------------------------------------------------
# Doubling trick
# ---------------------------------------------------------------------------


def default_initial_guess(num_experts: int) -> float:
    """4 ln N, which makes the first epoch's learning rate exactly 1."""
    return 4 * math.log(num_experts) if num_experts >= 2 else 1.0


def _eta_for(guess: float, num_experts: int) -> float:
    return tune_eta(guess, num_experts) if num_experts >= 2 else 1.0


def grow_guess(guess: float, accumulated: float) -> float:
    """Double ``guess`` until it covers ``accumulated``."""
    while accumulated > guess:
        guess *= 2
    return guess


@dataclass(frozen=True)
class DoublingState:
    inner: LearnerState
    current_guess: float
    accumulated: float = 0.0
    epoch: int = 1
    initial_guess: float = 0.0


def make_doubling(num_experts: int, initial_guess: Optional[float] = None) -> DoublingState:
    g0 = default_initial_guess(num_experts) if initial_guess is None else float(initial_guess)
    if not g0 > 0:
        raise ValueError("initial guess must be positive")
    inner = make_learner("exp3lb", num_experts, _eta_for(g0, num_experts))
    return DoublingState(inner, g0, 0.0, 1, g0)


def doubling_step(state: DoublingState, feedback: RoundFeedback) -> tuple[DoublingState, ProbabilityVector]:
    """Exp3.LB step with a restart whenever the observed pessimistic quantity outgrows the guess.

    Each round adds d(lb)^2/2 + 2 sum_i (1-lb_i)^2 + 4 max_i(1-lb_i) d(lb), which
    depends on the revealed lower bounds only. On overflow the guess doubles
    until it covers the running total, the inner learner restarts from zero
    and its learning rate is retuned to the new guess.
    """
    contribution = float(unknown_horizon_round_terms(np.asarray(feedback.lower_bounds)[None, :])[0])
    inner, p = learner_step(state.inner, feedback)
    accumulated = state.accumulated + contribution
    if accumulated <= state.current_guess:
        return replace(state, inner=inner, accumulated=accumulated), p
    guess = grow_guess(state.current_guess, accumulated)
    n = inner.num_experts
    fresh = LearnerState("exp3lb", _eta_for(guess, n), np.zeros(n), 0.0, inner.round)
    new = replace(state, inner=fresh, current_guess=guess, accumulated=accumulated, epoch=state.epoch + 1)
    return new, fresh.distribution()


def doubling_schedule(lower_bounds, initial_guess: Optional[float] = None) -> list[dict]:
    """Epochs the doubling wrapper goes through on a fixed sequence of lower bounds.

    Returns one dict per epoch with ``start`` and ``stop`` round indices
    (half-open), the ``guess`` and the ``eta`` used in it. The schedule is a
    deterministic function of the lower bounds, so it is shared by every
    replicate.
    """
    lam = np.asarray(lower_bounds, dtype=float)
    n = lam.shape[1]
    guess = default_initial_guess(n) if initial_guess is None else float(initial_guess)
    terms = unknown_horizon_round_terms(lam)
    epochs, start, acc = [], 0, 0.0
    for t, c in enumerate(terms):
        acc += c
        if acc > guess:
            epochs.append({"start": start, "stop": t + 1, "guess": guess, "eta": _eta_for(guess, n)})
            guess = grow_guess(guess, acc)
            start = t + 1
    epochs.append({"start": start, "stop": len(terms), "guess": guess, "eta": _eta_for(guess, n)})
    return [e for e in epochs if e["stop"] > e["start"]] or epochs
