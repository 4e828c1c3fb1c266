"""Episode runner, Monte Carlo pseudo-regret estimation and bound comparison.

Two execution paths share the estimator arithmetic in :mod:`lbexperts.learners`:

* :func:`run_episode` plays one game round by round through
  :func:`~lbexperts.learners.learner_step` and records a :class:`RunTrace`.
* :func:`simulate` plays many replicates at once as ``(R, N)`` arrays.
  Replicate ``r`` uses the random stream seeded with ``seed ^ r``, so its
  actions and distributions match ``run_episode(..., seed ^ r)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .core import (
    GameInstance,
    RandomStream,
    RunTrace,
    distribution_from_cumloss,
    normalize_instance,
    sample_action,
    sample_actions,
    validate_instance,
)
from .environments import ScenarioSpec, feedback_for, full_feedback_for, generate_instance
from .learners import (
    ALGORITHMS,
    default_initial_guess,
    doubling_schedule,
    doubling_step,
    estimate,
    exp3ub_alphas,
    learner_step,
    make_doubling,
    make_learner,
)
from .quantities import (
    BETA_MODES,
    PRESETS,
    BoundQuantities,
    BetaTuning,
    Q_unknown_horizon,
    expected_regret_bound,
    hp_regret_bound,
    hp_regret_bound_part_ii,
    hp_regret_bound_tuned,
    preset_quantity,
    round_terms,
    theorem_Q,
    tune_beta,
    tune_eta,
    tune_eta_preset,
)

__all__ = [
    "LEARNER_NAMES",
    "LearnerConfig",
    "ExperimentConfig",
    "ResolvedLearner",
    "RegretReport",
    "BoundCheck",
    "ConcentrationResult",
    "resolve_learner",
    "run_episode",
    "simulate",
    "estimate_pseudo_regret",
    "bound_check",
    "concentration_check",
    "sweep",
    "json_default",
]

LEARNER_NAMES = ALGORITHMS + ("exp3lb_doubling",)
_LOWER_MODEL = ("hedge", "exp3", "exp3lb", "exp3lbp", "exp3lb_doubling")


@dataclass
class LearnerConfig:
    """Learner block of an experiment config.

    ``eta`` is a number, ``"auto"`` (tuned to the exact second-order
    quantity) or ``"auto_simplified"`` (tuned to the simplified quantity).
    ``beta`` is a number or ``{"mode": "hp_i"|"hp_ii"|"hp_iii", "delta": d}``.
    ``eta_preset`` names a special-scenario tuning (full_info, bandit, mixed,
    variable_subset) and overrides ``eta``.
    """

    algorithm: str = "exp3lb"
    eta: Union[float, str] = "auto"
    beta: Union[float, dict, None] = None
    eta_preset: Optional[str] = None
    initial_guess: Optional[float] = None

    def __post_init__(self):
        if self.algorithm not in LEARNER_NAMES:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected one of {LEARNER_NAMES}")
        if isinstance(self.eta, str):
            if self.eta not in ("auto", "auto_simplified"):
                raise ValueError(f"eta must be a number, 'auto' or 'auto_simplified', got {self.eta!r}")
        elif not (isinstance(self.eta, (int, float)) and self.eta > 0):
            raise ValueError(f"eta must be positive, got {self.eta!r}")
        if self.eta_preset is not None and self.eta_preset not in PRESETS:
            raise ValueError(f"unknown eta_preset {self.eta_preset!r}; expected one of {PRESETS}")
        if isinstance(self.beta, dict):
            if self.beta.get("mode") not in BETA_MODES:
                raise ValueError(f"beta.mode must be one of {BETA_MODES}")
            d = self.beta.get("delta")
            if d is not None and not 0 < d < 1:
                raise ValueError("beta.delta must lie in (0, 1)")
        elif self.beta is not None and not (isinstance(self.beta, (int, float)) and self.beta >= 0):
            raise ValueError(f"beta must be nonnegative, got {self.beta!r}")
        if self.beta not in (None, 0, 0.0) and self.algorithm != "exp3lbp":
            raise ValueError("beta is only meaningful for exp3lbp")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "LearnerConfig":
        known = {"algorithm", "eta", "beta", "eta_preset", "initial_guess"}
        extra = set(doc) - known
        if extra:
            raise ValueError(f"unknown learner field(s): {sorted(extra)}")
        return cls(**doc)


@dataclass
class ExperimentConfig:
    scenario: ScenarioSpec
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    replicates: int = 100
    seed: int = 0
    delta: float = 0.05
    out: Optional[str] = None
    sweep: Optional[dict] = None
    # Directory that relative paths in the config resolve against.
    base_dir: Optional[str] = None

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")

    @classmethod
    def from_dict(cls, doc: dict, base_dir: Optional[str] = None) -> "ExperimentConfig":
        known = {"scenario", "learner", "replicates", "seed", "delta", "out", "sweep"}
        extra = set(doc) - known
        if extra:
            raise ValueError(f"unknown config field(s): {sorted(extra)}")
        if "scenario" not in doc:
            raise ValueError("config needs a 'scenario' block")
        seed = int(doc.get("seed", 0))
        scen = dict(doc["scenario"])
        scen.setdefault("seed", seed)
        return cls(
            scenario=ScenarioSpec.from_dict(scen),
            learner=LearnerConfig.from_dict(doc.get("learner", {})),
            replicates=int(doc.get("replicates", 100)),
            seed=seed,
            delta=float(doc.get("delta", 0.05)),
            out=doc.get("out"),
            sweep=doc.get("sweep"),
            base_dir=base_dir,
        )

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.to_dict(),
            "learner": self.learner.to_dict(),
            "replicates": self.replicates,
            "seed": self.seed,
            "delta": self.delta,
            "out": self.out,
            "sweep": self.sweep,
        }


# ---------------------------------------------------------------------------
# Resolving a learner against an instance
# ---------------------------------------------------------------------------


@dataclass
class ResolvedLearner:
    """A learner config bound to a concrete instance: parameters and bound."""

    algorithm: str
    instance: GameInstance
    eta: float
    beta: float
    bound: float
    bound_kind: str
    quantities: BoundQuantities
    high_probability: bool = False
    delta: Optional[float] = None
    feedback_model: str = "lower"
    schedule: Optional[list] = None
    # Per-round bound for the prefix of the game ending at that round.
    bound_curve: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)


def _effective_bounds(algorithm: str, inst: GameInstance) -> np.ndarray:
    """The per-expert side information the learner's analysis runs on."""
    if algorithm == "hedge":
        return np.array(inst.losses)
    if algorithm == "exp3":
        return np.zeros_like(inst.losses)
    if algorithm == "exp3ub":
        return exp3ub_alphas(inst.upper_bounds, inst.slack_caps[:, None])
    return np.array(inst.lower_bounds)


def _in_unit_range(inst: GameInstance) -> bool:
    return bool(inst.losses.min() >= 0 and inst.losses.max() <= 1)


def _preset_params(preset: str, inst: GameInstance) -> tuple[dict, np.ndarray]:
    """Preset parameters read off the instance, plus the per-round preset quantity."""
    N, T = inst.num_experts, inst.horizon
    l, lam = inst.losses, inst.lower_bounds
    if preset != "full_info" and not _in_unit_range(inst):
        raise ValueError(f"the {preset} preset assumes losses in [0, 1]")
    if preset == "full_info":
        if np.any(lam != l):
            raise ValueError("full_info preset needs lower bounds equal to losses")
        d2 = np.ptp(l, axis=1) ** 2
        return {"q": float(np.sum(d2)), "N": N}, d2 / 2
    if preset == "bandit":
        if np.any(lam != 0):
            raise ValueError("bandit preset needs all lower bounds zero")
        return {"N": N, "T": T}, np.full(T, 2.0 * N)
    known = lam == l
    if np.any(~known & (lam != 0)):
        raise ValueError(f"{preset} preset needs each lower bound to be either the loss or zero")
    if preset == "mixed":
        full = known.all(axis=1)
        bandit = (lam == 0).all(axis=1) & ~full
        if not np.all(full | bandit):
            raise ValueError("mixed preset needs every round fully revealed or fully bandit")
        per_round = np.where(full, 0.5, 2.0 * N)
        return {"N": N, "T_f": int(full.sum()), "T_b": int(bandit.sum())}, per_round
    sizes = known.sum(axis=1)
    return {"N": N, "subset_sizes": sizes.tolist()}, 4.5 + 2.0 * (N - sizes)


def resolve_learner(cfg: LearnerConfig, inst: GameInstance, delta: float = 0.05) -> ResolvedLearner:
    """Pick eta and beta for ``cfg`` on ``inst`` and attach the applicable regret bound."""
    validate_instance(inst).raise_if_invalid()
    alg = cfg.algorithm
    if alg == "exp3ub" and not inst.has_upper_bounds:
        raise ValueError("exp3ub needs an instance with upper bounds")
    normalized = alg in _LOWER_MODEL and inst.lower_bounds.min() < 0
    if normalized:
        inst = normalize_instance(inst)
    N, T = inst.num_experts, inst.horizon
    lam = _effective_bounds(alg, inst)
    slacks = np.maximum(inst.losses - lam, 0.0)
    quant = theorem_Q(lam, slacks)
    if lam.min() >= 0 and lam.max() <= 1 and _in_unit_range(inst):
        quant = BoundQuantities(**{**quant.to_dict(), "Q_uh": Q_unknown_horizon(lam)})
    d2, ss, hy = round_terms(lam, slacks)
    q_curve = np.cumsum(d2 / 2 + 2 * ss + 4 * hy)
    model = "upper" if alg == "exp3ub" else "lower"
    meta: dict = {"normalized": bool(normalized)}

    if alg == "exp3lb_doubling":
        if not (_in_unit_range(inst) and lam.min() >= 0):
            raise ValueError("the doubling wrapper needs losses and lower bounds in [0, 1]")
        schedule = doubling_schedule(lam, cfg.initial_guess)
        curve = np.zeros(T)
        done = 0.0
        for ep in schedule:
            sl = slice(ep["start"], ep["stop"])
            part = np.cumsum(d2[sl] / 2 + 2 * ss[sl] + 4 * hy[sl])
            curve[sl] = done + (math.log(N) / ep["eta"] + ep["eta"] * part / 4 if N > 1 else 0.0)
            done = float(curve[ep["stop"] - 1])
        meta.update(
            initial_guess=schedule[0]["guess"],
            accumulator="pessimistic observable: d(lb)^2/2 + 2*sum(1-lb)^2 + 4*max(1-lb)*d(lb)",
            epochs=len(schedule),
            final_guess=schedule[-1]["guess"],
        )
        return ResolvedLearner(
            alg, inst, schedule[0]["eta"], 0.0, float(curve[-1]), "doubling_epochwise",
            quant, schedule=schedule, bound_curve=curve, metadata=meta,
        )

    if N == 1:
        return ResolvedLearner(
            alg, inst, 1.0 if isinstance(cfg.eta, str) else float(cfg.eta), float(cfg.beta or 0.0),
            0.0, "single_expert", quant, feedback_model=model, bound_curve=np.zeros(T), metadata=meta,
        )

    beta = 0.0
    hp = isinstance(cfg.beta, dict) or (alg == "exp3lbp" and cfg.beta not in (None, 0, 0.0))
    tuning: Optional[BetaTuning] = None
    Q = quant.Q_theorem
    if isinstance(cfg.beta, dict):
        d = cfg.beta.get("delta", delta)
        tuning = tune_beta(Q, N, d, cfg.beta["mode"], T)
        beta = tuning.beta
        meta["beta_tuning"] = tuning.to_dict()
        Q = tuning.Q_used
    elif cfg.beta is not None:
        beta = float(cfg.beta)

    if cfg.eta_preset is not None:
        params, per_round = _preset_params(cfg.eta_preset, inst)
        eta = tune_eta_preset(cfg.eta_preset, **params)
        q_pre = preset_quantity(cfg.eta_preset, **params)
        bound, kind = math.sqrt(q_pre * math.log(N)), f"preset_{cfg.eta_preset}"
        curve = math.log(N) / eta + eta * np.cumsum(per_round) / 4
        meta["preset_params"] = {k: v for k, v in params.items() if k != "subset_sizes"}
    elif cfg.eta == "auto_simplified":
        qp = quant.Q_prime
        eta = tune_eta(qp, N) if qp > 0 else 1.0
        bound, kind = (math.sqrt(qp * math.log(N)) if qp > 0 else 0.0), "simplified_quantity"
        curve = math.log(N) / eta + eta * np.cumsum(4 * (d2 + ss)) / 4 if qp > 0 else np.zeros(T)
    elif cfg.eta == "auto":
        if Q > 0:
            eta = tune_eta(Q, N)
            bound, kind = math.sqrt(Q * math.log(N)), "second_order_tuned"
            curve = math.log(N) / eta + eta * q_curve / 4
        else:
            # Zero variation: every expert has the same loss each round, so regret is 0.
            eta, bound, kind, curve = 1.0, 0.0, "zero_variation", np.zeros(T)
    else:
        eta = float(cfg.eta)
        bound, kind = expected_regret_bound(eta, quant.Q_theorem, N), "second_order_any_eta"
        curve = math.log(N) / eta + eta * q_curve / 4

    d_hp = None
    if hp and beta > 0:
        d_hp = tuning.delta if tuning else delta
        max_s = float(slacks.max()) if slacks.size else 0.0
        if beta * max_s > 1 + 1e-12:
            raise ValueError(f"beta * max slack = {beta * max_s:.4g} exceeds 1; the high-probability analysis does not apply")
        smax2 = np.cumsum(slacks.max(axis=1) ** 2)
        curve = np.array([
            hp_regret_bound(eta, beta, d_hp, N, BoundQuantities(a, b, c, 0.0, 0.0), m)
            for a, b, c, m in zip(np.cumsum(d2), np.cumsum(ss), np.cumsum(hy), smax2)
        ])
        auto_eta = cfg.eta == "auto" and cfg.eta_preset is None
        if tuning and auto_eta and tuning.mode in ("hp_i", "hp_iii"):
            if tuning.mode == "hp_iii" and not (_in_unit_range(inst) and lam.min() >= 0):
                raise ValueError("hp_iii assumes losses in [0, 1]")
            bound, kind = hp_regret_bound_tuned(tuning.Q_used, N, d_hp), f"high_probability_{tuning.mode}"
        elif tuning and auto_eta:
            bound, kind = hp_regret_bound_part_ii(tuning.Q_used, N, d_hp), "high_probability_hp_ii"
        else:
            bound, kind = float(curve[-1]), "high_probability_any_eta_beta"
    elif hp:
        hp = False

    return ResolvedLearner(
        alg, inst, float(eta), float(beta), float(bound), kind, quant,
        high_probability=hp, delta=d_hp, feedback_model=model,
        bound_curve=np.asarray(curve, dtype=float), metadata=meta,
    )


# ---------------------------------------------------------------------------
# Episodes
# ---------------------------------------------------------------------------


def _as_resolved(learner, inst: GameInstance, delta: float) -> ResolvedLearner:
    if isinstance(learner, ResolvedLearner):
        return learner
    if isinstance(learner, dict):
        learner = LearnerConfig.from_dict(learner)
    return resolve_learner(learner, inst, delta)


def run_episode(inst: GameInstance, learner, seed: int, delta: float = 0.05) -> RunTrace:
    """Play one game round by round and record everything.

    ``learner`` is a :class:`LearnerConfig`, its dict form, or a
    :class:`ResolvedLearner`. Deterministic given ``seed``.
    """
    plan = _as_resolved(learner, inst, delta)
    game = plan.instance
    T, N = game.horizon, game.num_experts
    rng = RandomStream(seed)
    if plan.algorithm == "exp3lb_doubling":
        state = make_doubling(N, plan.schedule[0]["guess"])
        p = state.inner.distribution()
    else:
        state = make_learner(plan.algorithm, N, plan.eta, plan.beta)
        p = state.distribution()

    dists = np.empty((T, N))
    actions = np.empty(T, dtype=int)
    realized = np.empty(T)
    est = np.empty((T, N))
    cum = np.empty((T, N))
    epochs = np.empty(T, dtype=int)
    for t in range(T):
        dists[t] = p.weights
        i = sample_action(p, rng)
        actions[t] = i
        realized[t] = game.losses[t, i]
        if plan.algorithm == "hedge":
            fb = full_feedback_for(game, t, i)
        else:
            fb = feedback_for(game, t, i, plan.feedback_model)
        if plan.algorithm == "exp3lb_doubling":
            epochs[t] = state.epoch
            est[t] = estimate("exp3lb", dists[t], i, fb.chosen_loss, lower_bounds=fb.lower_bounds)
            state, p = doubling_step(state, fb)
            # Holds the restarted (zero) vector on the round an epoch closes.
            cum[t] = state.inner.cum_est_losses
        else:
            before = state.cum_est_losses
            state, p = learner_step(state, fb)
            est[t] = state.cum_est_losses - before
            cum[t] = state.cum_est_losses
    best = np.min(np.cumsum(game.losses, axis=0), axis=1)
    regret = np.cumsum(realized) - best
    meta = {"algorithm": plan.algorithm, "eta": plan.eta, "beta": plan.beta, "seed": int(seed)}
    if plan.algorithm == "exp3lb_doubling":
        meta["epoch_of_round"] = epochs.tolist()
    return RunTrace(dists, actions, realized, est, cum, regret, meta)


@dataclass
class SimulationResult:
    replicate_ids: np.ndarray
    final_regret: np.ndarray
    final_cum_est: np.ndarray
    algorithm_loss: np.ndarray
    # Per-round sums over replicates of the regret and of its square.
    regret_sum: np.ndarray
    regret_sumsq: np.ndarray


def simulate(
    plan: ResolvedLearner,
    seed: int,
    replicates: Union[int, Sequence[int]],
) -> SimulationResult:
    """Play all replicates of ``plan`` simultaneously.

    ``replicates`` is a count (ids ``0..R-1``) or explicit replicate ids.
    Results are indexed in the order the ids are given.
    """
    ids = np.arange(replicates) if isinstance(replicates, (int, np.integer)) else np.asarray(replicates)
    game = plan.instance
    T, N = game.horizon, game.num_experts
    R = len(ids)
    rng = RandomStream.for_replicates(seed, ids)
    losses, lower = game.losses, game.lower_bounds
    upper, caps = game.upper_bounds, game.slack_caps
    best = np.min(np.cumsum(losses, axis=0), axis=1)
    alg = "exp3lb" if plan.algorithm == "exp3lb_doubling" else plan.algorithm

    starts = {}
    if plan.schedule is not None:
        starts = {ep["start"]: ep["eta"] for ep in plan.schedule}
    eta = plan.eta
    cum = np.zeros((R, N))
    alg_loss = np.zeros(R)
    rsum = np.zeros(T)
    rsq = np.zeros(T)
    for t in range(T):
        if t in starts:
            eta = starts[t]
            cum[:] = 0.0
        p = distribution_from_cumloss(eta, cum)
        chosen = sample_actions(p, rng)
        loss = losses[t, chosen]
        cum += estimate(
            alg, p, chosen, loss,
            losses=losses[t],
            lower_bounds=lower[t],
            upper_bounds=None if upper is None else upper[t],
            slack_cap=None if caps is None else caps[t],
            beta=plan.beta,
        )
        alg_loss += loss
        reg = alg_loss - best[t]
        rsum[t] = reg.sum()
        rsq[t] = np.dot(reg, reg)
    return SimulationResult(ids, alg_loss - best[-1], cum, alg_loss, rsum, rsq)


# ---------------------------------------------------------------------------
# Monte Carlo reports
# ---------------------------------------------------------------------------


@dataclass
class RegretReport:
    mean_pseudo_regret: float
    std_error: Optional[float]
    per_replicate_regret: list
    theoretical_bound: float
    bound_kind: str
    quantities: BoundQuantities
    eta_used: float
    beta_used: float
    violation_fraction: Optional[float] = None
    high_probability: bool = False
    delta: Optional[float] = None
    regret_quantile: Optional[float] = None
    metadata: dict = field(default_factory=dict)
    # Per-round regret curve: columns round, mean_regret, stderr, bound.
    curve: Optional[dict] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        doc = {k: v for k, v in asdict(self).items() if k not in ("curve", "quantities")}
        doc["quantities"] = self.quantities.to_dict()
        doc["std_error_defined"] = self.std_error is not None
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=json_default)

    def curve_csv(self) -> str:
        c = self.curve
        lines = ["round,mean_regret,stderr,bound"]
        for t, m, s, b in zip(c["round"], c["mean_regret"], c["stderr"], c["bound"]):
            lines.append(f"{t},{m!r},{'' if s is None else repr(s)},{b!r}")
        return "\n".join(lines) + "\n"


def json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _summarize(plan: ResolvedLearner, sim: SimulationResult, seed: int) -> RegretReport:
    R = len(sim.final_regret)
    reg = sim.final_regret
    mean = float(np.mean(reg))
    se = float(np.std(reg, ddof=1) / math.sqrt(R)) if R > 1 else None
    rounds = np.arange(1, plan.instance.horizon + 1)
    cmean = sim.regret_sum / R
    if R > 1:
        var = np.maximum(sim.regret_sumsq - R * cmean**2, 0.0) / (R - 1)
        cse = np.sqrt(var / R).tolist()
    else:
        cse = [None] * len(rounds)
    quantile = None
    if plan.high_probability:
        quantile = float(np.quantile(reg, 1 - plan.delta, method="higher"))
    meta = dict(plan.metadata)
    meta.update(replicates=R, seed=int(seed))
    return RegretReport(
        mean_pseudo_regret=mean,
        std_error=se,
        per_replicate_regret=reg.tolist(),
        theoretical_bound=plan.bound,
        bound_kind=plan.bound_kind,
        quantities=plan.quantities,
        eta_used=plan.eta,
        beta_used=plan.beta,
        high_probability=plan.high_probability,
        delta=plan.delta,
        regret_quantile=quantile,
        metadata=meta,
        curve={
            "round": rounds.tolist(),
            "mean_regret": cmean.tolist(),
            "stderr": cse,
            "bound": plan.bound_curve.tolist(),
        },
    )


def estimate_pseudo_regret(
    config: ExperimentConfig, instance: Optional[GameInstance] = None
) -> RegretReport:
    """Monte Carlo pseudo-regret of the configured learner, with its bound attached.

    The adversary is oblivious, so each replicate's regret is measured
    against the best expert's true cumulative loss.
    """
    inst = instance if instance is not None else generate_instance(config.scenario, config.base_dir)
    plan = resolve_learner(config.learner, inst, config.delta)
    sim = simulate(plan, config.seed, config.replicates)
    report = _summarize(plan, sim, config.seed)
    report.metadata["scenario"] = config.scenario.to_dict()
    report.metadata["learner"] = config.learner.to_dict()
    return report


@dataclass(frozen=True)
class BoundCheck:
    passed: bool
    margin: float
    statistic: float
    threshold: float

    def __bool__(self):
        return self.passed


def bound_check(report: RegretReport) -> BoundCheck:
    """Compare a report against its bound.

    Expected-regret bounds: pass iff mean <= bound + 3 standard errors (a
    single replicate gets no noise allowance). High-probability bounds: pass
    iff the empirical (1 - delta)-quantile of regret <= bound.
    """
    if report.high_probability:
        stat, thresh = report.regret_quantile, report.theoretical_bound
    else:
        stat = report.mean_pseudo_regret
        thresh = report.theoretical_bound + 3 * (report.std_error or 0.0)
    return BoundCheck(stat <= thresh, report.theoretical_bound - stat, stat, thresh)


@dataclass(frozen=True)
class ConcentrationResult:
    violation_fraction: float
    violations: int
    replicates: int
    expert: int
    threshold: float
    tolerance: float
    # Largest violation fraction over all experts, for reference.
    max_fraction_any_expert: float

    @property
    def passed(self) -> bool:
        return self.violation_fraction <= self.tolerance


def concentration_check(
    inst: GameInstance,
    beta: float,
    delta: float,
    replicates: int,
    seed: int = 0,
    expert: int = 0,
    eta: Optional[float] = None,
) -> ConcentrationResult:
    """Fraction of Exp3.LB.P runs whose estimated total for ``expert`` overshoots.

    A run violates when estimated cumulative loss exceeds the true one by
    more than ln(1/delta)/beta; the fraction should not exceed delta beyond
    binomial noise (tolerance delta + 3 sqrt(delta(1-delta)/R)).
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if inst.lower_bounds.min() < 0:
        inst = normalize_instance(inst)
    if beta * inst.slacks.max() > 1 + 1e-12:
        raise ValueError("beta * max slack exceeds 1")
    cfg = LearnerConfig("exp3lbp", eta if eta is not None else "auto", float(beta))
    plan = resolve_learner(cfg, inst, delta)
    sim = simulate(plan, seed, replicates)
    totals = np.sum(inst.losses, axis=0)
    threshold = math.log(1 / delta) / beta
    over = sim.final_cum_est > totals[None, :] + threshold
    v = int(over[:, expert].sum())
    return ConcentrationResult(
        violation_fraction=v / replicates,
        violations=v,
        replicates=replicates,
        expert=expert,
        threshold=threshold,
        tolerance=delta + 3 * math.sqrt(delta * (1 - delta) / replicates),
        max_fraction_any_expert=float(over.mean(axis=0).max()),
    )


def sweep(config: ExperimentConfig, parameter: str, values: Sequence) -> list[dict]:
    """Mean regret and bound across a grid of one scenario parameter.

    ``parameter`` is ``horizon``, ``num_experts`` or a key of the scenario's
    ``params`` block.
    """
    rows = []
    for v in values:
        scen = ScenarioSpec.from_dict(config.scenario.to_dict())
        if parameter in ("horizon", "num_experts"):
            setattr(scen, parameter, int(v))
        else:
            scen.params[parameter] = v
        cfg = ExperimentConfig(scen, config.learner, config.replicates, config.seed, config.delta, base_dir=config.base_dir)
        rep = estimate_pseudo_regret(cfg)
        chk = bound_check(rep)
        rows.append({
            "parameter": parameter,
            "value": v,
            "mean_regret": rep.mean_pseudo_regret,
            "stderr": rep.std_error,
            "bound": rep.theoretical_bound,
            "passed": chk.passed,
        })
    return rows
