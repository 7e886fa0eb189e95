"""Two-node blind-rendezvous simulation and analysis toolkit.

Simulates a pair of cognitive-radio nodes trying to meet on a mutually
open licensed channel, under stable, Markov-dynamic, flip, and
intruder-blocked availability models, with closed-form references and
exact small-instance oracles for validation.
"""

from .env import EnvSpec, NoCommonChannelError, max_dynamic_factor
from .strategies import StrategySpec, parse_strategy
from .engine import (BatchStats, TrialConfig, TrialOutcome, run_batch,
                     run_trial, trial_rng)
from .experiments import Cell, ExperimentPlan, PlanError

__version__ = "0.1.0"

__all__ = [
    "BatchStats", "Cell", "EnvSpec", "ExperimentPlan",
    "NoCommonChannelError", "PlanError", "StrategySpec", "TrialConfig",
    "TrialOutcome", "max_dynamic_factor", "parse_strategy", "run_batch",
    "run_trial", "trial_rng", "__version__",
]
