"""Shared domain types: game instances, distributions, randomness, feedback.

Loss-like matrices are stored round-major, shape ``(T, N)``: row ``t`` holds
every expert's value for round ``t``. The JSON form is row-per-expert
``(N, T)`` and is transposed on load/save. Expert and round indices are
0-based throughout the Python API.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

__all__ = [
    "InstanceError",
    "GameInstance",
    "ValidationResult",
    "validate_instance",
    "normalize_instance",
    "ProbabilityVector",
    "RandomStream",
    "sample_action",
    "sample_actions",
    "distribution_from_cumloss",
    "RoundFeedback",
    "FullFeedback",
    "RunTrace",
]

# Comparisons against bounds tolerate this much floating-point noise.
BOUND_ATOL = 1e-12


class InstanceError(ValueError):
    """Raised for malformed or invariant-violating game data."""


# ---------------------------------------------------------------------------
# Game instances
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GameInstance:
    """An oblivious adversary's full assignment for a game.

    All matrices have shape ``(horizon, num_experts)``. ``upper_bounds`` and
    ``slack_caps`` are present only for the upper-bound feedback model.
    """

    losses: np.ndarray
    lower_bounds: np.ndarray
    upper_bounds: Optional[np.ndarray] = None
    slack_caps: Optional[np.ndarray] = None
    # Generator bookkeeping (subset sizes, feedback-type counts); not serialized.
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in ("losses", "lower_bounds", "upper_bounds", "slack_caps"):
            value = getattr(self, name)
            if value is not None:
                arr = np.array(value, dtype=float)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)

    @property
    def horizon(self) -> int:
        return int(self.losses.shape[0])

    @property
    def num_experts(self) -> int:
        return int(self.losses.shape[1]) if self.losses.ndim == 2 else 0

    @property
    def slacks(self) -> np.ndarray:
        return self.losses - self.lower_bounds

    @property
    def has_upper_bounds(self) -> bool:
        return self.upper_bounds is not None

    def cumulative_losses(self) -> np.ndarray:
        """Per-round cumulative expert losses, shape ``(T, N)``."""
        return np.cumsum(self.losses, axis=0)

    # -- JSON ---------------------------------------------------------------

    def to_dict(self) -> dict:
        doc = {
            "num_experts": self.num_experts,
            "horizon": self.horizon,
            "losses": self.losses.T.tolist(),
            "lower_bounds": self.lower_bounds.T.tolist(),
        }
        if self.upper_bounds is not None:
            doc["upper_bounds"] = self.upper_bounds.T.tolist()
        if self.slack_caps is not None:
            doc["slack_caps"] = self.slack_caps.tolist()
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "GameInstance":
        try:
            n, t = int(doc["num_experts"]), int(doc["horizon"])
            losses = _expert_major(doc["losses"], n, t, "losses")
            lower = _expert_major(doc["lower_bounds"], n, t, "lower_bounds")
        except KeyError as exc:
            raise InstanceError(f"missing field {exc.args[0]!r}") from None
        upper = caps = None
        if doc.get("upper_bounds") is not None:
            upper = _expert_major(doc["upper_bounds"], n, t, "upper_bounds")
        if doc.get("slack_caps") is not None:
            caps = np.asarray(doc["slack_caps"], dtype=float)
            if caps.shape != (t,):
                raise InstanceError(f"slack_caps must have length {t}, got shape {caps.shape}")
        return cls(losses, lower, upper, caps)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "GameInstance":
        return cls.from_dict(json.loads(text))

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: Union[str, Path]) -> "GameInstance":
        return cls.from_json(Path(path).read_text())


def _expert_major(rows, n: int, t: int, name: str) -> np.ndarray:
    try:
        arr = np.asarray(rows, dtype=float)
    except ValueError:
        raise InstanceError(f"{name} is ragged") from None
    if arr.shape != (n, t):
        raise InstanceError(f"{name} must be {n}x{t} (row per expert), got shape {arr.shape}")
    return arr.T


@dataclass(frozen=True)
class ValidationResult:
    valid: bool
    message: str = ""
    # (expert, round) of the first violation, scanning round by round.
    cell: Optional[tuple] = None

    def __bool__(self):
        return self.valid

    def raise_if_invalid(self):
        if not self.valid:
            raise InstanceError(self.message)


def _first_violation(mask: np.ndarray) -> Optional[tuple]:
    hits = np.argwhere(mask)
    if hits.size == 0:
        return None
    t, i = hits[0]
    return int(i), int(t)


def validate_instance(inst: GameInstance, atol: float = BOUND_ATOL) -> ValidationResult:
    """Check shapes, finiteness and the lower/upper-bound invariants."""
    losses, lower = inst.losses, inst.lower_bounds
    if losses.ndim != 2 or losses.shape[0] < 1 or losses.shape[1] < 1:
        return ValidationResult(False, f"losses must be a non-empty matrix, got shape {losses.shape}")
    if lower.shape != losses.shape:
        return ValidationResult(
            False, f"dimension mismatch: lower_bounds {lower.shape} vs losses {losses.shape}"
        )
    for name, arr in (("losses", losses), ("lower_bounds", lower)):
        cell = _first_violation(~np.isfinite(arr))
        if cell:
            return ValidationResult(False, f"non-finite {name} at expert {cell[0]}, round {cell[1]}", cell)
    cell = _first_violation(lower > losses + atol)
    if cell:
        return ValidationResult(
            False, f"lower bound exceeds loss at expert {cell[0]}, round {cell[1]}", cell
        )
    if (inst.upper_bounds is None) != (inst.slack_caps is None):
        return ValidationResult(False, "upper_bounds and slack_caps must be given together")
    if inst.upper_bounds is not None:
        upper, caps = inst.upper_bounds, inst.slack_caps
        if upper.shape != losses.shape:
            return ValidationResult(
                False, f"dimension mismatch: upper_bounds {upper.shape} vs losses {losses.shape}"
            )
        if caps.shape != (losses.shape[0],):
            return ValidationResult(
                False, f"dimension mismatch: slack_caps {caps.shape} vs horizon {losses.shape[0]}"
            )
        cell = _first_violation(upper < losses - atol)
        if cell:
            return ValidationResult(
                False, f"upper bound below loss at expert {cell[0]}, round {cell[1]}", cell
            )
        cell = _first_violation(upper - losses > caps[:, None] + atol)
        if cell:
            return ValidationResult(
                False, f"upper-bound slack exceeds cap at expert {cell[0]}, round {cell[1]}", cell
            )
    return ValidationResult(True)


def normalize_instance(inst: GameInstance) -> GameInstance:
    """Shift each round so that its smallest lower bound is zero.

    Slacks, spreads and all within-round loss differences are unchanged, so
    the regret of every algorithm is unchanged too.
    """
    validate_instance(inst).raise_if_invalid()
    shift = inst.lower_bounds.min(axis=1, keepdims=True)
    upper = None if inst.upper_bounds is None else inst.upper_bounds - shift
    return GameInstance(inst.losses - shift, inst.lower_bounds - shift, upper, inst.slack_caps, dict(inst.meta))


# ---------------------------------------------------------------------------
# Distributions and randomness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProbabilityVector:
    """A distribution over experts.

    Entries are finite and nonnegative and sum to 1. Exponential weights
    keep every entry positive unless ``eta`` times the spread of the
    cumulative losses exceeds about 745, where the weight underflows binary64
    and is stored as 0; such an expert is never sampled.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("probability vector must be a non-empty 1-D array")
        if not np.all(np.isfinite(w)) or np.any(w < 0.0):
            raise ValueError("probability vector entries must be finite and nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"probability vector sums to {w.sum()!r}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.weights.size

    def __getitem__(self, i):
        return self.weights[i]

    def __array__(self, dtype=None, copy=None):
        return self.weights if dtype is None else self.weights.astype(dtype)

    @classmethod
    def uniform(cls, n: int) -> "ProbabilityVector":
        return cls(np.full(n, 1.0 / n))


_GOLDEN_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64_MASK = (1 << 64) - 1


class RandomStream:
    """SplitMix64 generator (Steele, Lea & Flood 2014), optionally batched.

    Each step adds the golden-ratio increment to the 64-bit state and
    returns the mixed state. A uniform double in ``[0, 1)`` uses the top 53
    bits of one step. Known-answer vector: seed 1234567 yields
    6457827717110365317, 3203168211198807973, 9817491932198370423, ...

    A batched stream holds one independent state per replicate; replicate
    ``r`` of a batch seeded with ``s`` is identical to a scalar stream seeded
    with ``s ^ r``.
    """

    def __init__(self, seed: Union[int, Sequence[int], np.ndarray]):
        scalar = np.ndim(seed) == 0
        seeds = np.atleast_1d(np.asarray(seed, dtype=object))
        self._state = np.array([int(s) & _U64_MASK for s in seeds], dtype=np.uint64)
        self._scalar = scalar

    @classmethod
    def for_replicates(cls, seed: int, replicate_ids: Union[int, Sequence[int]]) -> "RandomStream":
        ids = range(replicate_ids) if isinstance(replicate_ids, (int, np.integer)) else replicate_ids
        base = int(seed) & _U64_MASK
        return cls(np.array([base ^ int(r) for r in ids], dtype=np.uint64))

    @property
    def size(self) -> int:
        return self._state.size

    @property
    def state(self):
        return int(self._state[0]) if self._scalar else self._state.copy()

    def next_u64(self):
        """Advance one step and return the raw 64-bit output(s)."""
        with np.errstate(over="ignore"):
            self._state += _GOLDEN_GAMMA
            z = self._state.copy()
            z = (z ^ (z >> np.uint64(30))) * _MIX1
            z = (z ^ (z >> np.uint64(27))) * _MIX2
            z ^= z >> np.uint64(31)
        return int(z[0]) if self._scalar else z

    def next_uniform(self):
        """One step, mapped to a double in ``[0, 1)``."""
        z = self.next_u64()
        if self._scalar:
            return (z >> 11) * 2.0**-53
        return (z >> np.uint64(11)).astype(float) * 2.0**-53

    def uniforms(self, n: int) -> np.ndarray:
        """``n`` consecutive uniforms from a scalar stream."""
        if not self._scalar:
            raise ValueError("uniforms() is defined for scalar streams only")
        with np.errstate(over="ignore"):
            steps = np.arange(1, n + 1, dtype=np.uint64) * _GOLDEN_GAMMA
            z = self._state[0] + steps
            self._state[0] = self._state[0] + np.uint64(n) * _GOLDEN_GAMMA
            z = (z ^ (z >> np.uint64(30))) * _MIX1
            z = (z ^ (z >> np.uint64(27))) * _MIX2
            z ^= z >> np.uint64(31)
        return (z >> np.uint64(11)).astype(float) * 2.0**-53


def _pick(p: np.ndarray, u) -> np.ndarray:
    # Index i is chosen iff cumsum[i-1] <= u < cumsum[i].
    edges = np.cumsum(p, axis=-1)[..., :-1]
    return np.sum(edges <= np.asarray(u)[..., None], axis=-1)


def sample_action(p, rng: RandomStream) -> int:
    """Draw one expert index from ``p`` using exactly one step of ``rng``."""
    weights = np.asarray(p, dtype=float)
    return int(_pick(weights, rng.next_uniform()))


def sample_actions(p: np.ndarray, rng: RandomStream) -> np.ndarray:
    """Batched :func:`sample_action`: row ``r`` of ``p`` uses replicate ``r``'s stream."""
    return _pick(p, rng.next_uniform())


def distribution_from_cumloss(eta: float, cum_est_losses):
    """Exponential weights over estimated cumulative losses.

    Computed as a softmax of ``-eta * L`` after subtracting the row minimum,
    so any finite input gives a finite result whose largest entry is at
    least 1/N. Entries stay positive while ``eta * spread(L) < 745``. Accepts a
    single vector (returns a :class:`ProbabilityVector`) or a ``(R, N)``
    batch (returns an array).
    """
    L = np.asarray(cum_est_losses, dtype=float)
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta!r}")
    if not np.all(np.isfinite(L)):
        raise ValueError("cumulative losses must be finite")
    w = np.exp(-eta * (L - L.min(axis=-1, keepdims=True)))
    p = w / w.sum(axis=-1, keepdims=True)
    if L.ndim == 1:
        return ProbabilityVector(p)
    return p


# ---------------------------------------------------------------------------
# Feedback and traces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RoundFeedback:
    """What a partial-feedback learner sees after acting.

    Only the chosen expert's loss is revealed. The side information is either
    the per-expert lower bounds, or the upper bounds plus the round's cap on
    upper-bound slack.
    """

    chosen: int
    chosen_loss: float
    lower_bounds: Optional[np.ndarray] = None
    upper_bounds: Optional[np.ndarray] = None
    slack_cap: Optional[float] = None

    def __post_init__(self):
        if self.lower_bounds is None and self.upper_bounds is None:
            raise ValueError("feedback needs lower_bounds or upper_bounds")
        if self.lower_bounds is not None and self.lower_bounds[self.chosen] > self.chosen_loss + BOUND_ATOL:
            raise ValueError("lower bound of the chosen expert exceeds its loss")
        if self.upper_bounds is not None and self.slack_cap is None:
            raise ValueError("upper-bound feedback needs slack_cap")


@dataclass(frozen=True)
class FullFeedback:
    """Full-information feedback (every expert's loss), consumed by Hedge."""

    chosen: int
    losses: np.ndarray

    @property
    def chosen_loss(self) -> float:
        return float(self.losses[self.chosen])


@dataclass
class RunTrace:
    """Per-round record of one episode. Arrays are indexed by round first."""

    distributions: np.ndarray
    actions: np.ndarray
    realized_losses: np.ndarray
    est_losses: np.ndarray
    cum_est_losses: np.ndarray
    # L_{A,t} - min_i L_{i,t} after each round.
    regret: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return len(self.actions)

    @property
    def algorithm_loss(self) -> float:
        return float(np.sum(self.realized_losses))

    @property
    def final_regret(self) -> float:
        return float(self.regret[-1])
