"""The property and bound suite behind ``lbexperts verify``.

Every check is a pure function of its seed and returns a :class:`CheckResult`.
Output contains no timings, so identical seeds give byte-identical reports.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import GameInstance, RandomStream
from .environments import ScenarioSpec, generate_instance
from .harness import (
    ExperimentConfig,
    LearnerConfig,
    bound_check,
    concentration_check,
    estimate_pseudo_regret,
    json_default,
    resolve_learner,
    run_episode,
)
from .learners import correction_factor, exp3lb_estimate
from .quantities import (
    Q_unknown_horizon,
    hessian_quadratic_form,
    potential_phi,
    spread,
    theorem_Q,
    tune_beta,
)

__all__ = ["CheckResult", "CHECKS", "run_suite", "format_report"]


@dataclass
class CheckResult:
    name: str
    passed: bool
    summary: str
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        self.passed = bool(self.passed)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.summary}"


def _ints(rng: RandomStream, lo: int, hi: int) -> int:
    """Uniform integer in ``[lo, hi]``."""
    return lo + min(int(rng.next_uniform() * (hi - lo + 1)), hi - lo)


def check_degeneracy(seed: int, instances: int = 20) -> CheckResult:
    """Each learner collapses to its classical limit bit for bit (within 1e-12)."""
    rng = RandomStream(seed)
    worst = 0.0
    same_actions = True
    pairs = {
        "bandit_lb_vs_exp3": ("bandit", "exp3lb", "exp3", None),
        "full_info_lb_vs_hedge": ("full_info", "exp3lb", "hedge", None),
        "lbp_beta0_vs_lb": ("generic_lb", "exp3lbp", "exp3lb", 0.0),
        "alpha_eq_lb_vs_lb": ("generic_lb", "exp3alpha", "exp3lb", None),
    }
    per_pair = {k: 0.0 for k in pairs}
    for _ in range(instances):
        n, T = _ints(rng, 2, 8), _ints(rng, 1, 500)
        eta = 0.05 + 1.95 * rng.next_uniform()
        inst_seed, play_seed = rng.next_u64(), rng.next_u64()
        for name, (kind, a, b, beta) in pairs.items():
            inst = generate_instance(ScenarioSpec(kind, n, T, seed=inst_seed))
            ta = run_episode(inst, LearnerConfig(a, eta, beta), play_seed)
            tb = run_episode(inst, LearnerConfig(b, eta), play_seed)
            diff = float(np.max(np.abs(ta.distributions - tb.distributions)))
            per_pair[name] = max(per_pair[name], diff)
            worst = max(worst, diff)
            same_actions &= bool(np.array_equal(ta.actions, tb.actions))
    passed = worst <= 1e-12 and same_actions
    return CheckResult(
        "degeneracy",
        passed,
        f"max |p_a - p_b| = {worst:.3e} over {instances} instances x 4 pairs (tol 1e-12), actions identical: {same_actions}",
        {"max_abs_diff": worst, "per_pair": per_pair, "actions_identical": same_actions},
    )


def check_unbiasedness(seed: int, triples: int = 1000) -> CheckResult:
    """Averaging the estimate over the sampling distribution recovers the true loss."""
    rng = RandomStream(seed)
    worst = 0.0
    for _ in range(triples):
        n = _ints(rng, 1, 8)
        w = rng.uniforms(n) + 0.01
        p = w / w.sum()
        l = rng.uniforms(n)
        lam = l * rng.uniforms(n)
        est = np.array([exp3lb_estimate(i, l[i], lam, p) for i in range(n)])
        for k in range(n):
            mean = math.fsum(p[i] * est[i, k] for i in range(n))
            worst = max(worst, abs(mean - l[k]))
    return CheckResult(
        "unbiasedness",
        worst <= 1e-14,
        f"max |E est - l| = {worst:.3e} over {triples} triples (tol 1e-14)",
        {"max_abs_error": worst},
    )


def correction_residuals(p: np.ndarray, b: np.ndarray) -> dict:
    """Worst violation of each correction-factor identity on a grid of (p, beta*s)."""
    x = correction_factor(p, b)
    ident = np.abs(x - b * ((1 - x) / p + 2 * x - 1))
    return {
        "range": float(max(np.max(-x), np.max(x - 1), 0.0)),
        "zero_iff": float(np.max(np.abs(x[b == 0]))) if np.any(b == 0) else 0.0,
        "ii_identity": float(np.max(ident)),
        "iii_upper": float(np.max(b * ((1 - x) / p - 1) - 1)),
        "iv_product": float(np.max(p * x * b - b**2)),
        "v_square": float(np.max(b * (1 - x) ** 2 / p - 1)),
        "x_positive_when_b_positive": bool(np.all(x[b > 0] > 0)),
    }


def check_correction_grid(seed: int = 0, size: int = 200) -> CheckResult:
    p, b = np.meshgrid(np.linspace(0.005, 0.995, size), np.linspace(0.0, 1.0, size), indexing="ij")
    res = correction_residuals(p.ravel(), b.ravel())
    numeric = {k: v for k, v in res.items() if not isinstance(v, bool)}
    worst = max(numeric.values())
    passed = worst <= 1e-10 and res["x_positive_when_b_positive"]
    return CheckResult(
        "correction_grid",
        passed,
        f"worst residual {worst:.3e} on {size}x{size} grid incl. beta*s in {{0, 1}} (tol 1e-10)",
        res,
    )


_BOUND_SCENARIOS = (
    ("bandit", {}),
    ("full_info", {}),
    ("mixed", {"num_full": 1000, "num_bandit": 1000}),
    ("variable_subset", {"subset_size": "uniform"}),
    ("generic_lb", {"slack_fraction": 0.5}),
)


def _bound_rows(seed: int, scenarios, learner_for, n=8, T=2000, replicates=1000):
    rng = RandomStream(seed)
    rows = []
    for kind, prm in scenarios:
        spec = ScenarioSpec(kind, n, T, seed=rng.next_u64(), params=dict(prm))
        cfg = ExperimentConfig(spec, learner_for(kind), replicates, rng.next_u64())
        rep = estimate_pseudo_regret(cfg)
        chk = bound_check(rep)
        rows.append({
            "scenario": kind,
            "mean": rep.mean_pseudo_regret,
            "stderr": rep.std_error,
            "bound": rep.theoretical_bound,
            "bound_kind": rep.bound_kind,
            "eta": rep.eta_used,
            "passed": chk.passed,
        })
    return rows


def _rows_summary(rows) -> str:
    return "; ".join(f"{r['scenario']} {r['mean']:.2f}+-{r['stderr']:.2f} <= {r['bound']:.2f}" for r in rows)


def check_second_order_bounds(seed: int, replicates: int = 1000) -> CheckResult:
    rows = _bound_rows(seed, _BOUND_SCENARIOS, lambda k: LearnerConfig("exp3lb", "auto"), replicates=replicates)
    return CheckResult(
        "second_order_bounds",
        all(r["passed"] for r in rows),
        _rows_summary(rows),
        {"rows": rows},
    )


def check_preset_bounds(seed: int, replicates: int = 1000) -> CheckResult:
    scen = (
        ("mixed", {"num_full": 1000, "num_bandit": 1000}),
        ("variable_subset", {"subset_size": "uniform"}),
        ("bandit", {}),
        ("full_info", {}),
    )
    rows = _bound_rows(seed, scen, lambda k: LearnerConfig("exp3lb", eta_preset=k), replicates=replicates)
    anchor = resolve_learner(
        LearnerConfig("exp3lb", eta_preset="bandit"),
        generate_instance(ScenarioSpec("bandit", 2, 1000, seed=seed)),
    ).bound
    anchor_ok = abs(anchor - math.sqrt(2 * 1000 * 2 * math.log(2))) <= 1e-9 and abs(anchor - 52.66) < 0.01
    return CheckResult(
        "preset_bounds",
        all(r["passed"] for r in rows) and anchor_ok,
        _rows_summary(rows) + f"; bandit N=2 T=1000 anchor {anchor:.4f}",
        {"rows": rows, "bandit_anchor": anchor},
    )


def _hp_instance(seed: int) -> GameInstance:
    return generate_instance(ScenarioSpec("bandit", 4, 1000, seed=seed))


def check_concentration(seed: int, replicates: int = 10_000, delta: float = 0.05) -> CheckResult:
    rng = RandomStream(seed)
    inst = _hp_instance(rng.next_u64())
    q = theorem_Q(inst.lower_bounds, inst.slacks).Q_theorem
    beta = tune_beta(q, inst.num_experts, delta, "hp_i").beta
    res = concentration_check(inst, beta, delta, replicates, seed=rng.next_u64(), expert=0)
    passed = res.violation_fraction <= 0.0565
    return CheckResult(
        "concentration",
        passed,
        f"violation fraction {res.violation_fraction:.4f} for expert 0 (tol 0.0565, beta {beta:.4f}, "
        f"max over experts {res.max_fraction_any_expert:.4f})",
        {
            "violation_fraction": res.violation_fraction,
            "violations": res.violations,
            "beta": beta,
            "threshold": res.threshold,
            "max_fraction_any_expert": res.max_fraction_any_expert,
        },
    )


def check_hp_regret(seed: int, replicates: int = 10_000, delta: float = 0.05) -> CheckResult:
    rng = RandomStream(seed)
    spec = ScenarioSpec("bandit", 4, 1000, seed=rng.next_u64())
    learner = LearnerConfig("exp3lbp", "auto", {"mode": "hp_iii", "delta": delta})
    rep = estimate_pseudo_regret(ExperimentConfig(spec, learner, replicates, rng.next_u64(), delta))
    chk = bound_check(rep)
    return CheckResult(
        "hp_regret",
        chk.passed,
        f"{1 - delta:.2f}-quantile {rep.regret_quantile:.2f} <= bound {rep.theoretical_bound:.2f} "
        f"(beta {rep.beta_used:.4f}, eta {rep.eta_used:.4f})",
        {
            "quantile": rep.regret_quantile,
            "bound": rep.theoretical_bound,
            "mean": rep.mean_pseudo_regret,
            "beta": rep.beta_used,
            "eta": rep.eta_used,
        },
    )


def _fd_second_derivative(z, x, eta, p0) -> float:
    """Richardson-extrapolated central second difference of phi along x."""
    scale = eta * max(spread(x), 1e-12)
    h = 2e-2 / scale

    def second(step):
        return (potential_phi(z + step * x, eta, p0) - 2 * potential_phi(z, eta, p0) + potential_phi(z - step * x, eta, p0)) / step**2

    return (4 * second(h / 2) - second(h)) / 3


def check_hessian(seed: int, samples: int = 100) -> CheckResult:
    rng = RandomStream(seed)
    worst_rel = 0.0
    worst_range = 0.0
    for _ in range(samples):
        n = _ints(rng, 2, 8)
        z = 2 * rng.uniforms(n) - 1
        x = 2 * rng.uniforms(n) - 1
        eta = 0.1 + 4.9 * rng.next_uniform()
        w = rng.uniforms(n) + 0.05
        p0 = w / w.sum()
        h = hessian_quadratic_form(z, x, eta, p0)
        fd = _fd_second_derivative(z, x, eta, p0)
        worst_rel = max(worst_rel, abs(fd - h) / abs(h))
        lo = -eta * spread(x) ** 2 / 4
        worst_range = max(worst_range, h - 0.0, lo - h)
    passed = worst_rel <= 1e-6 and worst_range <= 0.0
    return CheckResult(
        "hessian",
        passed,
        f"max relative FD error {worst_rel:.3e} (tol 1e-6), range violation {max(worst_range, 0.0):.3e} on {samples} inputs",
        {"max_relative_error": worst_rel, "max_range_violation": worst_range},
    )


def check_doubling(seed: int, instances: int = 50, replicates: int = 20) -> CheckResult:
    """Regret of the doubling wrapper over a growing horizon, scaled by its adaptive quantity.

    Each horizon uses the same instance seeds (losses are prefix-consistent
    across horizons) so the ratio reflects both instance and learner
    randomness. Standard errors are taken across instances.
    """
    rng = RandomStream(seed)
    inst_seeds = [rng.next_u64() for _ in range(instances)]
    play_seed = rng.next_u64()
    learner = LearnerConfig("exp3lb_doubling")
    rows = []
    for T in (500, 1000, 2000, 4000):
        ratios, excess = [], []
        for s in inst_seeds:
            spec = ScenarioSpec("generic_lb", 4, T, seed=s, params={"slack_fraction": 0.5})
            inst = generate_instance(spec)
            rep = estimate_pseudo_regret(ExperimentConfig(spec, learner, replicates, play_seed), inst)
            scale = math.sqrt(Q_unknown_horizon(inst.lower_bounds) * math.log(inst.num_experts))
            ratios.append(rep.mean_pseudo_regret / scale)
            excess.append(rep.mean_pseudo_regret - rep.theoretical_bound)
        ratios = np.array(ratios)
        excess = np.array(excess)
        rows.append({
            "T": T,
            "ratio": float(ratios.mean()),
            "ratio_stderr": float(ratios.std(ddof=1) / math.sqrt(instances)),
            "max_instance_ratio": float(ratios.max()),
            "max_excess_over_explicit_bound": float(excess.max()),
        })
    monotone = all(
        b["ratio"] <= a["ratio"] + 3 * math.hypot(a["ratio_stderr"], b["ratio_stderr"])
        for a, b in zip(rows, rows[1:])
    )
    explicit = all(r["max_excess_over_explicit_bound"] <= 0 for r in rows)
    c = max(r["max_instance_ratio"] for r in rows)
    return CheckResult(
        "doubling",
        monotone and explicit,
        "mean ratios " + ", ".join(f"T={r['T']}: {r['ratio']:.4f}+-{r['ratio_stderr']:.4f}" for r in rows)
        + f"; fitted c = {c:.4f}; non-increasing within noise: {monotone}; every instance under explicit bound: {explicit}",
        {"rows": rows, "fitted_c": c, "monotone": monotone, "instances": instances, "replicates": replicates},
    )


def check_quantity_properties(seed: int, instances: int = 1000) -> CheckResult:
    """Sandwich between the exact and simplified quantities, and the unit-range dominance."""
    rng = RandomStream(seed)
    worst_lo = worst_hi = worst_uh = -math.inf
    for _ in range(instances):
        n, T = _ints(rng, 1, 8), _ints(rng, 1, 30)
        l = rng.uniforms(T * n).reshape(T, n)
        lam = l * rng.uniforms(T * n).reshape(T, n)
        bq = theorem_Q(lam, l - lam)
        base = bq.q_lb + bq.sum_sq_slack
        worst_lo = max(worst_lo, base / 2 - bq.Q_theorem)
        worst_hi = max(worst_hi, bq.Q_theorem - 4 * base)
        worst_uh = max(worst_uh, bq.Q_theorem - Q_unknown_horizon(lam))
    tol = 1e-9
    passed = worst_lo <= tol and worst_hi <= tol and worst_uh <= tol
    return CheckResult(
        "quantity_sandwich",
        passed,
        f"{instances} instances: max (lower gap, upper gap, unit-range gap) = "
        f"({worst_lo:.2e}, {worst_hi:.2e}, {worst_uh:.2e}) (tol {tol:g})",
        {"lower": worst_lo, "upper": worst_hi, "unit_range": worst_uh},
    )


CHECKS: tuple[tuple[str, Callable[[int], CheckResult]], ...] = (
    ("degeneracy", check_degeneracy),
    ("unbiasedness", check_unbiasedness),
    ("correction_grid", check_correction_grid),
    ("second_order_bounds", check_second_order_bounds),
    ("preset_bounds", check_preset_bounds),
    ("concentration", check_concentration),
    ("hp_regret", check_hp_regret),
    ("hessian", check_hessian),
    ("doubling", check_doubling),
    ("quantity_sandwich", check_quantity_properties),
)


def run_suite(seed: int, only=None, progress: Callable[[CheckResult], None] | None = None) -> list[CheckResult]:
    """Run every check (or those named in ``only``), each with a seed derived from ``seed``."""
    master = RandomStream(seed)
    results = []
    for key, fn in CHECKS:
        sub = master.next_u64()
        if only and key not in only:
            continue
        res = fn(sub)
        results.append(res)
        if progress:
            progress(res)
    return results


def format_report(seed: int, results: list[CheckResult]) -> str:
    doc = {
        "seed": seed,
        "all_passed": all(r.passed for r in results),
        "checks": [{"name": r.name, "passed": r.passed, "summary": r.summary, "details": r.details} for r in results],
    }
    return json.dumps(doc, indent=2, sort_keys=True, default=json_default) + "\n"
