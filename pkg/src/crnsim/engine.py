"""Trial and batch execution for the two-node rendezvous simulation.

A trial plays out round by round: both nodes observe their availability
vectors (intruder mask applied), each selects a channel by its strategy,
and the trial ends at the first round where both selections name the same
channel (the time-to-rendezvous, TTR) or when ``max_rounds`` is hit.

clock asynchrony: Bob's round index is Alice's plus ``clock_offset``.  Both
nodes still act in the same global slots; the offset only shifts what the
time-adaptive window rules believe the round number is.  Stationary rules
ignore the index entirely, so for them any offset is a distributional no-op
(batches at different offsets with the same seed are in fact bit-identical).

Determinism: every trial owns a generator derived from ``(seed, trial
index)`` via ``numpy.random.SeedSequence``, so batches reproduce exactly
regardless of execution order or worker count, and trial ``i`` of a batch
equals ``run_trial`` on the same config.  Two implementations of the trial
loop exist: the pure one here, built from the public env/strategy
operations, and the compiled twin in :mod:`crnsim._kernel`.  They consume
the random stream identically and the test suite asserts exact outcome
equality between them.

Early capping: some configurations provably cannot rendezvous any more
(a window rule past channel n, or both nodes pinned to unequal fixed
selections in a non-mixing regime).  Both loops then report the trial as
capped immediately instead of spinning to ``max_rounds``; ttr and channel
are unaffected, and ``no_common_rounds`` counts only simulated rounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import env as env_mod
from . import strategies as strat_mod
from . import _kernel
from .env import EnvSpec, NoCommonChannelError
from .strategies import StrategySpec

MAX_ROUNDS_DEFAULT = 1_000_000

_KIND_CODES = {
    strat_mod.KIND_A: _kernel.CODE_A,
    strat_mod.KIND_B: _kernel.CODE_B,
    strat_mod.KIND_BTILDE: _kernel.CODE_BTILDE,
    strat_mod.KIND_C: _kernel.CODE_C,
    strat_mod.KIND_RANDOM: _kernel.CODE_RANDOM,
}


@dataclass(frozen=True)
class TrialConfig:
    """Everything one trial needs: environment, strategy pair, asynchrony,
    round cap, and the master seed the trial streams derive from."""

    env: EnvSpec
    strat_a: StrategySpec
    strat_b: StrategySpec
    clock_offset: int = 0
    max_rounds: int = MAX_ROUNDS_DEFAULT
    seed: int = 0

    def __post_init__(self):
        if self.clock_offset < 0:
            raise ValueError(f"clock_offset must be >= 0, got {self.clock_offset!r}")
        if self.max_rounds < 1:
            raise ValueError(f"max_rounds must be >= 1, got {self.max_rounds!r}")
        if not (0 <= self.seed < 2**64):
            raise ValueError(f"seed must fit in 64 bits, got {self.seed!r}")


@dataclass(frozen=True)
class TrialOutcome:
    """Result of one trial.

    ``ttr`` is the 1-based round of the first rendezvous and
    ``rendezvous_channel`` the channel both nodes picked there; both are
    None for a capped trial.  ``no_common_rounds`` counts simulated rounds
    in which the two visible availability vectors shared no open channel
    (a diagnostic for dynamic environments, where that is allowed).
    """

    ttr: int | None
    rendezvous_channel: int | None
    no_common_rounds: int

    @property
    def capped(self) -> bool:
        return self.ttr is None


@dataclass(frozen=True)
class BatchStats:
    """Aggregates over a batch of independent trials.

    ``mean_ttr``/``std_err`` cover the non-capped trials only (NaN when
    every trial capped, 0.0 std_err for a single survivor);
    ``frac_ge_threshold`` is the fraction of all trials with TTR at or
    above the tail threshold, counting capped trials as exceeding it.
    """

    trials: int
    mean_ttr: float
    std_err: float
    capped_count: int
    frac_ge_threshold: float


def trial_rng(seed: int, index: int) -> np.random.Generator:
    """The documented per-trial stream derivation: independent generators
    keyed by (master seed, trial index)."""
    return np.random.default_rng(np.random.SeedSequence((seed, index)))


def _window_exhausted(kind: str, idx: int, n: int) -> bool:
    # Window rules select nothing once their start passes channel n.
    if kind == strat_mod.KIND_B:
        return idx > n
    if kind == strat_mod.KIND_BTILDE:
        return (idx + 1) // 2 > n
    return False


def _trial_core(cfg: TrialConfig, rng: np.random.Generator,
                ) -> tuple[int, int, int, int, int]:
    """Pure reference trial loop; returns (status, ttr, channel, no_common,
    rejected) with the kernel's conventions.  Draw-for-draw twin of
    _kernel.run_trial_kernel."""
    e = cfg.env
    blocked = env_mod.sample_intruder_mask(e.intruder_q, e.n, rng)
    rejected = 0
    if e.is_stable:
        try:
            a, b, rejected = env_mod.sample_stable_pair(e, rng, blocked)
        except NoCommonChannelError:
            return _kernel.STATUS_NO_COMMON, -1, 0, 0, env_mod.REJECTION_CAP
    else:
        a = env_mod.sample_initial(e.p_a, e.n, rng)
        b = env_mod.sample_initial(e.p_b, e.n, rng)

    kind_a, kind_b = cfg.strat_a.kind, cfg.strat_b.kind
    static_cap = 0
    if kind_a == strat_mod.KIND_C and kind_b == strat_mod.KIND_C:
        if e.is_stable:
            static_cap = 1
        elif e.deterministic_flip:
            static_cap = 2

    no_common = 0
    for t in range(1, cfg.max_rounds + 1):
        ia = t
        ib = t + cfg.clock_offset
        if _window_exhausted(kind_a, ia, e.n) or _window_exhausted(kind_b, ib, e.n):
            return _kernel.STATUS_CAPPED, -1, 0, no_common, rejected
        if t > 1:
            if e.deterministic_flip:
                a = ~a
                b = ~b
            else:
                a = env_mod.evolve(a, e.p_a, e.lambda_a, rng)
                b = env_mod.evolve(b, e.p_b, e.lambda_b, rng)
        vis_a = env_mod.apply_intruder(a, blocked)
        vis_b = env_mod.apply_intruder(b, blocked)
        sel_a = strat_mod.select(cfg.strat_a, vis_a, ia, rng)
        sel_b = strat_mod.select(cfg.strat_b, vis_b, ib, rng)
        if not (vis_a & vis_b).any():
            no_common += 1
        if sel_a is not None and sel_a == sel_b:
            return _kernel.STATUS_OK, t, sel_a, no_common, rejected
        if static_cap and t >= static_cap:
            return _kernel.STATUS_CAPPED, -1, 0, no_common, rejected
    return _kernel.STATUS_CAPPED, -1, 0, no_common, rejected


def _trial_raw(cfg: TrialConfig, rng: np.random.Generator, use_kernel: bool,
               ) -> tuple[int, int, int, int, int]:
    if not use_kernel:
        return _trial_core(cfg, rng)
    e = cfg.env
    r_a = (cfg.strat_a.peer_open_prob / strat_mod.GEOMETRIC_DIVISOR
           if cfg.strat_a.kind == strat_mod.KIND_A else 0.0)
    r_b = (cfg.strat_b.peer_open_prob / strat_mod.GEOMETRIC_DIVISOR
           if cfg.strat_b.kind == strat_mod.KIND_A else 0.0)
    return _kernel.run_trial_kernel(
        rng, e.n, e.p_a, e.p_b, e.lambda_a, e.lambda_b, e.intruder_q,
        1 if e.deterministic_flip else 0,
        _KIND_CODES[cfg.strat_a.kind], _KIND_CODES[cfg.strat_b.kind],
        r_a, r_b, cfg.clock_offset, cfg.max_rounds)


def run_trial(cfg: TrialConfig, rng: np.random.Generator | None = None,
              ) -> TrialOutcome:
    """Run one trial.

    Without an explicit generator the trial uses stream (cfg.seed, 0), so
    it reproduces trial 0 of any batch with the same config.  Raises
    NoCommonChannelError when a stable environment exhausts the
    rejection-sampling budget.
    """
    if rng is None:
        rng = trial_rng(cfg.seed, 0)
    status, ttr, channel, no_common, rejected = _trial_core(cfg, rng)
    if status == _kernel.STATUS_NO_COMMON:
        raise NoCommonChannelError(
            f"no common open channel after {rejected} attempts "
            f"(n={cfg.env.n}, p_a={cfg.env.p_a}, p_b={cfg.env.p_b}, "
            f"q={cfg.env.intruder_q})")
    if status == _kernel.STATUS_OK:
        return TrialOutcome(ttr, channel, no_common)
    return TrialOutcome(None, None, no_common)


def _trial_arrays(cfg: TrialConfig, trials: int, use_kernel: bool = True,
                  ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray,
                             np.ndarray]:
    """Outcome columns for `trials` independent trials, indexed by trial
    number: (status, ttr, channel, no_common, rejected), all int64."""
    status = np.empty(trials, np.int64)
    ttr = np.empty(trials, np.int64)
    channel = np.empty(trials, np.int64)
    no_common = np.empty(trials, np.int64)
    rejected = np.empty(trials, np.int64)
    for i in range(trials):
        rng = trial_rng(cfg.seed, i)
        status[i], ttr[i], channel[i], no_common[i], rejected[i] = \
            _trial_raw(cfg, rng, use_kernel)
    return status, ttr, channel, no_common, rejected


def run_batch(cfg: TrialConfig, trials: int, tail_threshold: int | None = None,
              use_kernel: bool = True) -> BatchStats:
    """Run `trials` independent trials and aggregate.

    ``tail_threshold`` defaults to 3n.  Aggregation works on trial-indexed
    arrays, so the result is a pure function of (cfg, trials, threshold)
    no matter in which order the trials completed.  Capped trials are
    excluded from the mean and reported via capped_count; a trial that
    cannot even establish a common channel (stable rejection cap) raises.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials!r}")
    if tail_threshold is None:
        tail_threshold = 3 * cfg.env.n
    status, ttr, _, _, _ = _trial_arrays(cfg, trials, use_kernel)
    bad = np.flatnonzero(status == _kernel.STATUS_NO_COMMON)
    if len(bad):
        raise NoCommonChannelError(
            f"trial {bad[0]} of {trials} found no common open channel "
            f"(n={cfg.env.n}, p_a={cfg.env.p_a}, p_b={cfg.env.p_b}, "
            f"q={cfg.env.intruder_q})")
    ok = status == _kernel.STATUS_OK
    met = ttr[ok]
    m = len(met)
    if m == 0:
        mean = math.nan
        std_err = math.nan
    elif m == 1:
        mean = float(met[0])
        std_err = 0.0
    else:
        mean = float(met.mean())
        std_err = float(met.std(ddof=1) / math.sqrt(m))
    capped = int(trials - m)
    tail = int(np.count_nonzero(~ok) + np.count_nonzero(met >= tail_threshold))
    return BatchStats(trials, mean, std_err, capped, tail / trials)
