"""Best-expert learning when each round reveals lower bounds on every expert's loss."""

from .core import (
    FullFeedback,
    GameInstance,
    InstanceError,
    ProbabilityVector,
    RandomStream,
    RoundFeedback,
    RunTrace,
    distribution_from_cumloss,
    normalize_instance,
    sample_action,
    validate_instance,
)
from .environments import ScenarioSpec, feedback_for, generate_instance
from .harness import (
    ExperimentConfig,
    LearnerConfig,
    RegretReport,
    bound_check,
    concentration_check,
    estimate_pseudo_regret,
    resolve_learner,
    run_episode,
    simulate,
    sweep,
)
from .learners import doubling_step, learner_step, make_doubling, make_learner
from .quantities import theorem_Q, tune_beta, tune_eta, tune_eta_preset

__version__ = "0.1.0"
