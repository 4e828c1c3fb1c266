"""Scalar quantities, tuning rules and regret-bound expressions.

Every logarithm is natural. Matrix arguments are round-major ``(T, N)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "BoundQuantities",
    "BetaTuning",
    "spread",
    "relative_quadratic_variation",
    "round_terms",
    "theorem_Q",
    "Q_unknown_horizon",
    "unknown_horizon_round_terms",
    "tune_eta",
    "preset_quantity",
    "tune_eta_preset",
    "tune_beta",
    "expected_regret_bound",
    "hp_regret_bound",
    "hp_regret_bound_tuned",
    "hp_regret_bound_part_ii",
    "potential_phi",
    "hessian_quadratic_form",
    "popoviciu_bound",
]

PRESETS = ("full_info", "bandit", "mixed", "variable_subset")
BETA_MODES = ("hp_i", "hp_ii", "hp_iii")


@dataclass(frozen=True)
class BoundQuantities:
    q_lb: float
    sum_sq_slack: float
    hybrid: float
    Q_theorem: float
    Q_prime: float
    Q_uh: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class BetaTuning:
    """A tuned bias parameter plus what went into it."""

    beta: float
    mode: str
    Q_used: float
    delta: float
    delta_prime: float
    # True when hp_iii replaced Q by 2T.
    substituted: bool = False

    def __float__(self):
        return float(self.beta)

    def to_dict(self) -> dict:
        return asdict(self)


def spread(x) -> float:
    """max(x) - min(x)."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ValueError("spread of an empty vector")
    return float(x.max() - x.min())


def _as_rounds(seq) -> np.ndarray:
    try:
        arr = np.asarray(seq, dtype=float)
    except ValueError:
        raise ValueError("ragged sequence of vectors") from None
    if arr.size == 0:
        return arr.reshape(0, 0)
    if arr.ndim != 2:
        raise ValueError(f"expected T vectors of equal length, got shape {arr.shape}")
    return arr


def relative_quadratic_variation(seq) -> float:
    """Sum over rounds of the squared spread of each round's vector."""
    arr = _as_rounds(seq)
    if arr.shape[0] == 0:
        return 0.0
    d = arr.max(axis=1) - arr.min(axis=1)
    return float(np.sum(d * d))


def round_terms(lower_bounds, slacks):
    """Per-round (squared spread of bounds, squared slack norm, hybrid term)."""
    lam = _as_rounds(lower_bounds)
    s = _as_rounds(slacks)
    if lam.shape != s.shape:
        raise ValueError(f"shape mismatch: {lam.shape} vs {s.shape}")
    if np.any(s < 0):
        raise ValueError("slacks must be nonnegative")
    if lam.shape[0] == 0:
        z = np.zeros(0)
        return z, z, z
    d = lam.max(axis=1) - lam.min(axis=1)
    return d * d, np.sum(s * s, axis=1), s.max(axis=1) * d


def theorem_Q(lower_bounds, slacks) -> BoundQuantities:
    """Second-order quantities of a lower-bound game.

    ``Q_theorem = q/2 + 2*sum_sq_slack + 4*hybrid`` and
    ``Q_prime = 4*(q + sum_sq_slack)``.
    """
    d2, ss, hy = round_terms(lower_bounds, slacks)
    q, sss, h = float(np.sum(d2)), float(np.sum(ss)), float(np.sum(hy))
    return BoundQuantities(
        q_lb=q,
        sum_sq_slack=sss,
        hybrid=h,
        Q_theorem=q / 2 + 2 * sss + 4 * h,
        Q_prime=4 * (q + sss),
    )


def unknown_horizon_round_terms(lower_bounds) -> np.ndarray:
    """Per-round pessimistic contribution with each slack replaced by 1 - lower bound."""
    lam = _as_rounds(lower_bounds)
    if lam.size and (lam.min() < 0 or lam.max() > 1):
        raise ValueError("lower bounds must lie in [0, 1]")
    if lam.shape[0] == 0:
        return np.zeros(0)
    pess = 1.0 - lam
    d = lam.max(axis=1) - lam.min(axis=1)
    return 0.5 * d * d + 2 * np.sum(pess * pess, axis=1) + 4 * pess.max(axis=1) * d


def Q_unknown_horizon(lower_bounds) -> float:
    return float(np.sum(unknown_horizon_round_terms(lower_bounds)))


def tune_eta(Q: float, N: int) -> float:
    """Learning rate sqrt(4 ln N / Q)."""
    if not Q > 0:
        raise ValueError(f"Q must be positive, got {Q!r}")
    if N < 2:
        raise ValueError(f"need at least two experts, got {N}")
    return math.sqrt(4 * math.log(N) / Q)


def _require_positive(params: dict, *names):
    for name in names:
        if name not in params or params[name] is None:
            raise ValueError(f"missing parameter {name!r}")
        if not params[name] > 0:
            raise ValueError(f"parameter {name!r} must be positive, got {params[name]!r}")


def _missing_total(params: dict) -> float:
    if "subset_sizes" in params and params["subset_sizes"] is not None:
        sizes = np.asarray(params["subset_sizes"], dtype=float)
        N = params["N"]
        if np.any(sizes < 0) or np.any(sizes > N):
            raise ValueError("subset sizes must lie in [0, N]")
        if "T" in params and params["T"] is not None and len(sizes) != params["T"]:
            raise ValueError("need one subset size per round")
        return float(np.sum(N - sizes)), len(sizes)
    if "missing_total" in params:
        if params["missing_total"] < 0:
            raise ValueError("missing_total must be nonnegative")
        _require_positive(params, "T")
        return float(params["missing_total"]), params["T"]
    raise ValueError("variable_subset needs subset_sizes or missing_total")


def preset_quantity(scenario: str, **params) -> float:
    """The Q value whose generic tuning reproduces a special-scenario preset.

    full_info: q/2 (params ``q``); bandit: 2NT (``N``, ``T``); mixed:
    T_f/2 + 2N T_b (``N``, ``T_f``, ``T_b``); variable_subset:
    9T/2 + 2 sum_t (N - |S_t|) (``N`` plus ``subset_sizes`` or ``T`` and
    ``missing_total``).
    """
    if scenario == "full_info":
        _require_positive(params, "q")
        return params["q"] / 2
    if scenario == "bandit":
        _require_positive(params, "N", "T")
        return 2.0 * params["N"] * params["T"]
    if scenario == "mixed":
        _require_positive(params, "N")
        tf, tb = params.get("T_f"), params.get("T_b")
        if tf is None or tb is None or tf < 0 or tb < 0 or tf + tb <= 0:
            raise ValueError("mixed needs nonnegative T_f and T_b, not both zero")
        return tf / 2 + 2.0 * params["N"] * tb
    if scenario == "variable_subset":
        _require_positive(params, "N")
        missing, T = _missing_total(params)
        if T <= 0:
            raise ValueError("variable_subset needs at least one round")
        return 4.5 * T + 2 * missing
    raise ValueError(f"unknown preset scenario {scenario!r}; expected one of {PRESETS}")


def tune_eta_preset(scenario: str, **params) -> float:
    """Learning rate tuned to a special scenario's closed-form quantity."""
    if scenario == "full_info":
        _require_positive(params, "q", "N")
        return math.sqrt(8 * math.log(params["N"]) / params["q"])
    if scenario == "bandit":
        _require_positive(params, "N", "T")
        N, T = params["N"], params["T"]
        return math.sqrt(2 * math.log(N) / (N * T))
    if scenario == "mixed":
        preset_quantity("mixed", **params)
        N = params["N"]
        return math.sqrt(8 * math.log(N) / (params["T_f"] + 4 * N * params["T_b"]))
    if scenario == "variable_subset":
        _require_positive(params, "N")
        missing, T = _missing_total(params)
        return math.sqrt(8 * math.log(params["N"]) / (9 * T + 4 * missing))
    raise ValueError(f"unknown preset scenario {scenario!r}; expected one of {PRESETS}")


def tune_beta(Q: float, N: int, delta: float, mode: str, T: Optional[int] = None) -> BetaTuning:
    """Bias parameter for the high-probability learner.

    hp_i: sqrt((2/Q) ln(1/delta')) with delta' = delta/(N+3).
    hp_ii: sqrt(2/Q).
    hp_iii: Q is first raised to 2T, then min(1, hp_i value).
    """
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")
    if not Q > 0:
        raise ValueError(f"Q must be positive, got {Q!r}")
    delta_prime = delta / (N + 3)
    if mode == "hp_i":
        beta = math.sqrt(2 / Q * math.log(1 / delta_prime))
        return BetaTuning(beta, mode, Q, delta, delta_prime)
    if mode == "hp_ii":
        return BetaTuning(math.sqrt(2 / Q), mode, Q, delta, delta_prime)
    if mode == "hp_iii":
        if T is None or T < 1:
            raise ValueError("hp_iii needs the horizon T")
        q_used = max(Q, 2.0 * T)
        beta = min(1.0, math.sqrt(2 / q_used * math.log(1 / delta_prime)))
        return BetaTuning(beta, mode, q_used, delta, delta_prime, substituted=q_used != Q)
    raise ValueError(f"unknown beta mode {mode!r}; expected one of {BETA_MODES}")


# ---------------------------------------------------------------------------
# Regret bounds
# ---------------------------------------------------------------------------


def expected_regret_bound(eta: float, Q: float, N: int) -> float:
    """(ln N)/eta + eta*Q/4, valid for any eta; equals sqrt(Q ln N) at the tuned eta."""
    return math.log(N) / eta + eta * Q / 4


def hp_regret_bound(
    eta: float,
    beta: float,
    delta: float,
    N: int,
    quantities: BoundQuantities,
    sum_max_sq_slack: float,
) -> float:
    """High-probability regret bound for arbitrary eta > 0 and beta > 0.

    Holds with probability at least 1 - delta when beta * max slack <= 1. All
    N + 3 concentration events use delta/(N+3).
    """
    lg = math.log((N + 3) / delta)
    q, ss, h = quantities.q_lb, quantities.sum_sq_slack, quantities.hybrid
    return (
        math.log(N) / eta
        + eta * q / 8
        + eta * ss / 2
        + eta * h
        + beta * ss
        + lg / beta
        + (1 + eta / (2 * beta)) * math.sqrt(0.5 * lg * sum_max_sq_slack)
        + math.sqrt(0.5 * q * lg)
    )


def hp_regret_bound_tuned(Q: float, N: int, delta: float) -> float:
    """Closed form of the bound above at the tuned eta and beta (modes hp_i / hp_iii)."""
    return (1 + 1 / (2 * math.sqrt(2))) * math.sqrt(Q * math.log(N)) + (
        math.sqrt(2) + 1.5
    ) * math.sqrt(Q * math.log((N + 3) / delta))


def hp_regret_bound_part_ii(Q: float, N: int, delta: float) -> float:
    """Closed form for beta = sqrt(2/Q), which needs no slack assumption."""
    lg = math.log((N + 3) / delta)
    return (
        math.sqrt(Q * math.log(N))
        + math.sqrt(Q / 2) * (1 + lg)
        + (1 + math.sqrt(0.5 * math.log(N))) * math.sqrt(0.25 * Q * lg)
        + math.sqrt(Q * lg)
    )


# ---------------------------------------------------------------------------
# Potential function identities
# ---------------------------------------------------------------------------


def _check_potential_args(z, eta, p0):
    z = np.asarray(z, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    if not eta > 0:
        raise ValueError("eta must be positive")
    if not np.all(np.isfinite(z)):
        raise ValueError("z must be finite")
    if p0.shape != z.shape:
        raise ValueError("z and p0 must have the same length")
    return z, p0


def potential_phi(z, eta: float, p0) -> float:
    """Softmin potential -(1/eta) ln sum_j p0_j exp(-eta z_j), overflow-safe."""
    z, p0 = _check_potential_args(z, eta, p0)
    m = z.min()
    return float(m - math.log(np.sum(p0 * np.exp(-eta * (z - m)))) / eta)


def hessian_quadratic_form(z, x, eta: float, p0) -> float:
    """x' H x for the Hessian H of :func:`potential_phi` at ``z``.

    Equals -eta times the variance of x under the exponential-weights
    distribution p (the gradient of the potential), hence never positive.
    """
    z, p0 = _check_potential_args(z, eta, p0)
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)) or x.shape != z.shape:
        raise ValueError("x must be finite and match z")
    w = p0 * np.exp(-eta * (z - z.min()))
    p = w / w.sum()
    mean = np.dot(p, x)
    return float(-eta * np.dot(p, (x - mean) ** 2))


def popoviciu_bound(m: float, M: float) -> float:
    """Largest variance of a random variable confined to [m, M]."""
    if M < m:
        raise ValueError("need M >= m")
    return (M - m) ** 2 / 4
