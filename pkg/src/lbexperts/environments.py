"""Oblivious adversaries for each feedback scenario, and the feedback extractor."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .core import (
    FullFeedback,
    GameInstance,
    InstanceError,
    RandomStream,
    RoundFeedback,
    validate_instance,
)

__all__ = [
    "SCENARIO_KINDS",
    "LOSS_MODELS",
    "ScenarioSpec",
    "generate_instance",
    "feedback_for",
    "full_feedback_for",
    "best_expert_loss",
]

SCENARIO_KINDS = ("full_info", "bandit", "mixed", "variable_subset", "generic_lb", "upper_bound")
LOSS_MODELS = ("uniform_iid", "bernoulli_gap", "adversarial_handcrafted")


@dataclass
class ScenarioSpec:
    """Recipe for a game instance.

    Kind-specific ``params``:

    * mixed: ``num_full`` and ``num_bandit`` (placed in random order), or an
      explicit ``full_rounds`` list of booleans.
    * variable_subset: explicit ``subsets`` (one list of expert indices per
      round), or ``subset_size`` as an int or ``"uniform"`` (size drawn
      uniformly from 0..N each round, members at random).
    * generic_lb: ``slack_fraction`` f in [0, 1] (default 0.5); the lower
      bound is l - f*u*|l| for fresh uniforms u. ``loss_range`` [lo, hi]
      rescales uniform_iid losses.
    * upper_bound: ``cap`` c (default 0.2); upper bound l + c*v, slack cap c.

    Loss-model params: bernoulli_gap takes ``mean`` (0.5), ``gap`` (0.1) and
    ``best`` (0); adversarial_handcrafted takes ``path`` to an instance JSON
    whose losses are replayed exactly (its lower bounds too, for generic_lb).
    """

    kind: str
    num_experts: int
    horizon: int
    loss_model: str = "uniform_iid"
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}; expected one of {SCENARIO_KINDS}")
        if self.loss_model not in LOSS_MODELS:
            raise ValueError(f"unknown loss model {self.loss_model!r}; expected one of {LOSS_MODELS}")
        if self.loss_model != "adversarial_handcrafted" and (self.num_experts < 1 or self.horizon < 1):
            raise ValueError("num_experts and horizon must be positive")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "num_experts": self.num_experts,
            "horizon": self.horizon,
            "loss_model": self.loss_model,
            "seed": self.seed,
            "params": dict(self.params),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioSpec":
        known = {"kind", "num_experts", "horizon", "loss_model", "seed", "params"}
        extra = set(doc) - known
        if extra:
            raise ValueError(f"unknown scenario field(s): {sorted(extra)}")
        return cls(
            kind=doc["kind"],
            num_experts=int(doc.get("num_experts", 0)),
            horizon=int(doc.get("horizon", 0)),
            loss_model=doc.get("loss_model", "uniform_iid"),
            seed=int(doc.get("seed", 0)),
            params=dict(doc.get("params", {})),
        )


def _draw_losses(spec: ScenarioSpec, rng: RandomStream, base_dir: Optional[Path]):
    n, T = spec.num_experts, spec.horizon
    prm = spec.params
    if spec.loss_model == "uniform_iid":
        u = rng.uniforms(T * n).reshape(T, n)
        if spec.kind == "generic_lb" and "loss_range" in prm:
            lo, hi = map(float, prm["loss_range"])
            if hi < lo:
                raise ValueError("loss_range must be [lo, hi] with lo <= hi")
            return lo + (hi - lo) * u, None
        return u, None
    if spec.loss_model == "bernoulli_gap":
        mean, gap, best = float(prm.get("mean", 0.5)), float(prm.get("gap", 0.1)), int(prm.get("best", 0))
        if not (0 <= mean - gap and mean <= 1 and 0 <= best < n):
            raise ValueError("bernoulli_gap needs 0 <= mean-gap, mean <= 1 and a valid best index")
        means = np.full(n, mean)
        means[best] = mean - gap
        u = rng.uniforms(T * n).reshape(T, n)
        return (u < means).astype(float), None
    path = Path(prm["path"]) if "path" in prm else None
    if path is None:
        raise ValueError("adversarial_handcrafted needs params.path")
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    inst = GameInstance.load(path)
    return np.array(inst.losses), inst


def _subsets(spec: ScenarioSpec, rng: RandomStream, n: int, T: int) -> list:
    prm = spec.params
    if "subsets" in prm:
        subsets = [sorted(set(int(i) for i in s)) for s in prm["subsets"]]
        if len(subsets) != T:
            raise ValueError(f"need {T} subsets, got {len(subsets)}")
        if any(i < 0 or i >= n for s in subsets for i in s):
            raise ValueError("subset member out of range")
        return subsets
    rule = prm.get("subset_size", "uniform")
    out = []
    for _ in range(T):
        if rule == "uniform":
            k = min(int(rng.next_uniform() * (n + 1)), n)
        else:
            k = int(rule)
            if not 0 <= k <= n:
                raise ValueError(f"subset_size must lie in [0, {n}]")
        order = np.argsort(rng.uniforms(n), kind="stable")
        out.append(sorted(int(i) for i in order[:k]))
    return out


def generate_instance(spec: ScenarioSpec, base_dir: Optional[Union[str, Path]] = None) -> GameInstance:
    """Materialize ``spec`` as a validated instance; deterministic in ``spec.seed``."""
    rng = RandomStream(spec.seed)
    losses, loaded = _draw_losses(spec, rng, Path(base_dir) if base_dir is not None else None)
    if loaded is not None:
        if spec.num_experts and spec.num_experts != loaded.num_experts:
            raise ValueError("num_experts disagrees with the handcrafted instance")
        if spec.horizon and spec.horizon != loaded.horizon:
            raise ValueError("horizon disagrees with the handcrafted instance")
    T, n = losses.shape
    meta: dict = {"kind": spec.kind}
    upper = caps = None
    prm = spec.params
    if spec.kind == "full_info":
        lower = losses.copy()
    elif spec.kind in ("bandit", "upper_bound"):
        lower = np.zeros_like(losses)
        if spec.kind == "upper_bound":
            c = float(prm.get("cap", 0.2))
            if c < 0:
                raise ValueError("cap must be nonnegative")
            upper = losses + c * rng.uniforms(T * n).reshape(T, n)
            # Rounding in l + c*v may push the difference a hair past c.
            caps = np.maximum(np.full(T, c), np.max(upper - losses, axis=1))
    elif spec.kind == "mixed":
        if "full_rounds" in prm:
            full = np.asarray(prm["full_rounds"], dtype=bool)
            if full.shape != (T,):
                raise ValueError(f"full_rounds must have length {T}")
        else:
            tf, tb = int(prm.get("num_full", -1)), int(prm.get("num_bandit", -1))
            if tf < 0 or tb < 0 or tf + tb != T:
                raise ValueError(f"num_full + num_bandit must equal the horizon {T}")
            order = np.argsort(rng.uniforms(T), kind="stable")
            full = np.zeros(T, dtype=bool)
            full[order[:tf]] = True
        lower = np.where(full[:, None], losses, 0.0)
        meta.update(num_full=int(full.sum()), num_bandit=int(T - full.sum()), full_rounds=full)
    elif spec.kind == "variable_subset":
        subsets = _subsets(spec, rng, n, T)
        mask = np.zeros((T, n), dtype=bool)
        for t, s in enumerate(subsets):
            mask[t, s] = True
        lower = np.where(mask, losses, 0.0)
        meta.update(subsets=subsets, subset_sizes=[len(s) for s in subsets])
    else:  # generic_lb
        if loaded is not None and prm.get("replay_lower_bounds", True):
            lower = np.array(loaded.lower_bounds)
        else:
            f = float(prm.get("slack_fraction", 0.5))
            if not 0 <= f <= 1:
                raise ValueError("slack_fraction must lie in [0, 1]")
            # |l| keeps the slack nonnegative when loss_range admits negative losses.
            lower = losses - f * rng.uniforms(T * n).reshape(T, n) * np.abs(losses)
    if spec.kind in ("mixed", "variable_subset", "bandit") and (losses.min() < 0 or losses.max() > 1):
        raise ValueError(f"{spec.kind} requires losses in [0, 1]")
    inst = GameInstance(losses, lower, upper, caps, meta)
    result = validate_instance(inst)
    if not result:
        raise InstanceError(f"generated instance is invalid: {result.message}")
    return inst


def feedback_for(inst: GameInstance, t: int, chosen: int, model: str = "lower") -> RoundFeedback:
    """Reveal the chosen expert's loss plus the round's side information.

    ``model="lower"`` reveals all lower bounds; ``model="upper"`` reveals all
    upper bounds and the slack cap. No other expert's loss is exposed.
    """
    if not 0 <= t < inst.horizon:
        raise IndexError(f"round {t} out of range")
    if not 0 <= chosen < inst.num_experts:
        raise IndexError(f"expert {chosen} out of range")
    loss = float(inst.losses[t, chosen])
    if model == "lower":
        return RoundFeedback(chosen, loss, lower_bounds=np.array(inst.lower_bounds[t]))
    if model == "upper":
        if inst.upper_bounds is None:
            raise ValueError("instance has no upper bounds")
        return RoundFeedback(
            chosen, loss, upper_bounds=np.array(inst.upper_bounds[t]), slack_cap=float(inst.slack_caps[t])
        )
    raise ValueError(f"unknown feedback model {model!r}")


def full_feedback_for(inst: GameInstance, t: int, chosen: int) -> FullFeedback:
    if not 0 <= t < inst.horizon:
        raise IndexError(f"round {t} out of range")
    return FullFeedback(chosen, np.array(inst.losses[t]))


def best_expert_loss(inst: GameInstance) -> tuple[int, float]:
    """Index and total loss of the best expert in hindsight (lowest index on ties)."""
    totals = np.sum(inst.losses, axis=0)
    i = int(np.argmin(totals))
    return i, float(totals[i])
