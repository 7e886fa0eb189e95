"""Config-driven experiment harness emitting CSV.

A plan is a grid over (n, p, lambda, q) and a list of strategy pairs, plus
run settings (trials, master seed, round cap, tail rule).  Plans load from
INI-style files with ``key = value`` lines in ``[grid]``, ``[run]`` and
``[sweep]`` sections; every key can also be overridden from the command
line.  The effective settings are echoed into the CSV as ``#`` comment
lines so an output file documents how to regenerate itself.

Determinism: each cell's trial seed derives from the master seed plus the
cell's own parameters (not its position in the grid), so the same physical
cell produces byte-identical rows no matter which study emits it; in
particular a q sweep's q=1 row equals the matching no-intruder run.

The ``lambda = 2`` grid value selects the deterministic flip regime (every
channel inverts each round), which is the only meaningful reading of the
dynamic factor's upper extreme for general p; the CSV reports it as 2.
"""

from __future__ import annotations

import csv
import configparser
from dataclasses import dataclass, replace

import numpy as np

from .env import EnvSpec, NoCommonChannelError, max_dynamic_factor
from .strategies import (KIND_A, KIND_B, KIND_BTILDE, KIND_C, KIND_RANDOM,
                         StrategySpec, parse_strategy)
from .engine import MAX_ROUNDS_DEFAULT, TrialConfig, run_batch

FLIP_LAMBDA = 2.0

CSV_COLUMNS = ("strategy", "n", "p_a", "p_b", "lambda_a", "lambda_b", "q",
               "clock_offset", "trials", "mean_ttr", "std_err",
               "capped_count", "frac_ge_3n", "seed", "error")

# Kind name -> stable small integer for seed derivation; never reorder.
_KIND_SEED_CODE = {KIND_A: 0, KIND_B: 1, KIND_BTILDE: 2, KIND_C: 3,
                   KIND_RANDOM: 4}

SKIP_STABLE_C = ("skipped: stationary first-open rule cannot rendezvous "
                 "in a stable environment")


class PlanError(ValueError):
    """Invalid experiment plan (bad file, bad value, or invalid grid cell)."""


@dataclass(frozen=True)
class ExperimentPlan:
    """Grid, run settings, and sweep settings for the studies."""

    n_values: tuple = (20, 30, 50)
    p_values: tuple = (0.6, 0.75, 0.9)
    lambda_values: tuple = (0.0, 0.1, 1.0)
    q_values: tuple = (1.0,)
    strategies: tuple = (KIND_RANDOM, KIND_A, KIND_B, KIND_C)
    trials: int = 100_000
    seed: int = 0
    max_rounds: int = MAX_ROUNDS_DEFAULT
    clock_offset: int = 0
    tail_rule: str = "3n"
    sweep_n: tuple = (20, 30, 50, 80, 100)
    sweep_p: tuple = (0.6, 0.675, 0.75, 0.825, 0.9)
    sweep_lambda: tuple = (0.0, 0.1, 0.3, 0.5, 1.0, 1.5, FLIP_LAMBDA)
    sweep_q: tuple = (0.6, 0.75, 0.9, 1.0)
    base_n: int = 30
    base_p: float = 0.6
    base_lambda: float = 1.0
    base_q: float = 1.0


@dataclass(frozen=True)
class Cell:
    """One simulated grid point: environment numbers plus a strategy pair.

    ``peer_a``/``peer_b`` override the geometric rule's peer probability;
    None derives it from the other node's p, which is its definition.
    """

    n: int
    p_a: float
    p_b: float
    lam_a: float
    lam_b: float
    q: float
    kind_a: str
    kind_b: str
    offset: int = 0
    peer_a: float | None = None
    peer_b: float | None = None


def _lambda_ok(lam: float, p: float) -> bool:
    if lam == FLIP_LAMBDA:
        return True
    return 0.0 <= lam <= max_dynamic_factor(p) + 1e-12


def validate_plan(plan: ExperimentPlan) -> None:
    if not plan.n_values or any(n < 1 for n in plan.n_values):
        raise PlanError(f"bad n grid {plan.n_values!r}")
    for name, probs in (("p", plan.p_values), ("q", plan.q_values),
                        ("sweep p", plan.sweep_p), ("sweep q", plan.sweep_q)):
        if not probs or any(not 0.0 < v <= 1.0 for v in probs):
            raise PlanError(f"bad {name} grid {probs!r}")
    for p in plan.p_values:
        for lam in plan.lambda_values:
            if not _lambda_ok(lam, p):
                raise PlanError(f"lambda={lam:g} invalid for p={p:g} "
                                f"(max {max_dynamic_factor(p):g})")
    for lam in plan.sweep_lambda:
        if not _lambda_ok(lam, plan.base_p):
            raise PlanError(f"sweep lambda={lam:g} invalid for base p="
                            f"{plan.base_p:g}")
    for p in plan.sweep_p:
        if not _lambda_ok(plan.base_lambda, p):
            raise PlanError(f"base lambda={plan.base_lambda:g} invalid for "
                            f"sweep p={p:g}")
    if not _lambda_ok(plan.base_lambda, plan.base_p):
        raise PlanError("base lambda incompatible with base p")
    if not plan.strategies:
        raise PlanError("no strategies in plan")
    for kind in plan.strategies:
        parse_strategy(kind, 0.5)
    if plan.trials < 1:
        raise PlanError(f"trials must be >= 1, got {plan.trials!r}")
    if plan.max_rounds < 1:
        raise PlanError(f"max_rounds must be >= 1, got {plan.max_rounds!r}")
    if plan.clock_offset < 0:
        raise PlanError(f"clock_offset must be >= 0, got {plan.clock_offset!r}")
    if not 0 <= plan.seed < 2**64:
        raise PlanError(f"seed must fit in 64 bits, got {plan.seed!r}")
    if plan.base_n < 1:
        raise PlanError(f"bad sweep base n {plan.base_n!r}")
    if not 0.0 < plan.base_p <= 1.0 or not 0.0 < plan.base_q <= 1.0:
        raise PlanError("sweep base p/q must lie in (0, 1]")
    tail_threshold_for(plan, 1)  # validates the rule string


def tail_threshold_for(plan: ExperimentPlan, n: int) -> int:
    rule = plan.tail_rule.strip().lower()
    if rule == "3n":
        return 3 * n
    try:
        threshold = int(rule)
    except ValueError:
        raise PlanError(f"tail rule must be '3n' or an integer, got "
                        f"{plan.tail_rule!r}") from None
    if threshold < 1:
        raise PlanError(f"tail threshold must be >= 1, got {threshold}")
    return threshold


def derive_cell_seed(master_seed: int, cell: Cell) -> int:
    """Cell seed from the master seed and the cell's content.

    Floats enter the entropy pool rounded to 1e-9 resolution, so values
    that print identically seed identically, and equal cells reached
    through different studies (e.g. a sweep endpoint) share their stream.
    """
    entropy = (master_seed, cell.n,
               _KIND_SEED_CODE[cell.kind_a], _KIND_SEED_CODE[cell.kind_b],
               cell.offset,
               round(cell.p_a * 1e9), round(cell.p_b * 1e9),
               round(cell.lam_a * 1e9), round(cell.lam_b * 1e9),
               round(cell.q * 1e9))
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])


def _make_strategy(kind: str, own_p: float, other_p: float,
                   peer_override: float | None) -> StrategySpec:
    if kind == KIND_A:
        peer = other_p if peer_override is None else peer_override
        return StrategySpec(kind, peer)
    return StrategySpec(kind)


def build_config(cell: Cell, plan: ExperimentPlan) -> TrialConfig:
    flip = cell.lam_a == FLIP_LAMBDA or cell.lam_b == FLIP_LAMBDA
    if flip and cell.lam_a != cell.lam_b:
        raise PlanError("flip regime (lambda = 2) must apply to both nodes")
    env = EnvSpec(n=cell.n, p_a=cell.p_a, p_b=cell.p_b,
                  lambda_a=0.0 if flip else cell.lam_a,
                  lambda_b=0.0 if flip else cell.lam_b,
                  intruder_q=cell.q, deterministic_flip=flip)
    strat_a = _make_strategy(cell.kind_a, cell.p_a, cell.p_b, cell.peer_a)
    strat_b = _make_strategy(cell.kind_b, cell.p_b, cell.p_a, cell.peer_b)
    return TrialConfig(env=env, strat_a=strat_a, strat_b=strat_b,
                       clock_offset=cell.offset, max_rounds=plan.max_rounds,
                       seed=derive_cell_seed(plan.seed, cell))


def _fmt(x: float) -> str:
    if x != x:  # NaN: nothing rendezvoused, capped_count tells the story
        return ""
    return "%.6g" % x


def _strategy_label(cell: Cell) -> str:
    if cell.kind_a == cell.kind_b:
        return cell.kind_a
    return f"{cell.kind_a}+{cell.kind_b}"


def _cell_is_stable(cell: Cell) -> bool:
    return cell.lam_a == 0.0 and cell.lam_b == 0.0


def run_cell(cell: Cell, plan: ExperimentPlan, skip_stable_c: bool = True,
             ) -> list:
    """One CSV row for one cell; simulation failures land in the error
    column instead of raising."""
    base = [_strategy_label(cell), str(cell.n), _fmt(cell.p_a), _fmt(cell.p_b),
            _fmt(cell.lam_a), _fmt(cell.lam_b), _fmt(cell.q),
            str(cell.offset), str(plan.trials)]
    if (skip_stable_c and cell.kind_a == KIND_C and cell.kind_b == KIND_C
            and _cell_is_stable(cell)):
        return base + ["", "", "", "", str(derive_cell_seed(plan.seed, cell)),
                       SKIP_STABLE_C]
    cfg = build_config(cell, plan)
    try:
        stats = run_batch(cfg, plan.trials,
                          tail_threshold=tail_threshold_for(plan, cell.n))
    except NoCommonChannelError as exc:
        return base + ["", "", "", "", str(cfg.seed), str(exc)]
    return base + [_fmt(stats.mean_ttr), _fmt(stats.std_err),
                   str(stats.capped_count), _fmt(stats.frac_ge_threshold),
                   str(cfg.seed), ""]


def run_plan(plan: ExperimentPlan) -> list:
    """Full-grid study: one row per (n, lambda, strategy pair, p, q)."""
    validate_plan(plan)
    rows = []
    for n in plan.n_values:
        for lam in plan.lambda_values:
            for kind in plan.strategies:
                for p in plan.p_values:
                    for q in plan.q_values:
                        cell = Cell(n, p, p, lam, lam, q, kind, kind,
                                    plan.clock_offset)
                        rows.append(run_cell(cell, plan))
    return rows


TAIL_STRATEGIES = (KIND_A, KIND_C, KIND_RANDOM)
TAIL_P = 0.6


def tail_study(plan: ExperimentPlan) -> list:
    """Tail fractions (TTR >= threshold) in stable environments at p=0.6.

    Runs the stationary strategies only; the waiting rule is excluded
    because its stable-environment guarantee pins its tail fraction to 0.
    The first-open rule is included here (unlike the mean studies): its
    divergent trials are the tail being measured.
    """
    validate_plan(plan)
    rows = []
    for n in plan.n_values:
        for kind in TAIL_STRATEGIES:
            cell = Cell(n, TAIL_P, TAIL_P, 0.0, 0.0, 1.0, kind, kind,
                        plan.clock_offset)
            rows.append(run_cell(cell, plan, skip_stable_c=False))
    return rows


SWEEP_DIMS = ("n", "p", "lambda", "q")


def sweep_values(dim: str, plan: ExperimentPlan) -> tuple:
    if dim not in SWEEP_DIMS:
        raise PlanError(f"unknown sweep dimension {dim!r}; "
                        f"expected one of {SWEEP_DIMS}")
    return {"n": plan.sweep_n, "p": plan.sweep_p,
            "lambda": plan.sweep_lambda, "q": plan.sweep_q}[dim]


def sweep(dim: str, plan: ExperimentPlan) -> list:
    """One-dimensional sweep; all other parameters sit at the sweep base."""
    validate_plan(plan)
    values = sweep_values(dim, plan)
    rows = []
    for value in values:
        n = value if dim == "n" else plan.base_n
        p = value if dim == "p" else plan.base_p
        lam = value if dim == "lambda" else plan.base_lambda
        q = value if dim == "q" else plan.base_q
        for kind in plan.strategies:
            cell = Cell(n, p, p, lam, lam, q, kind, kind, plan.clock_offset)
            rows.append(run_cell(cell, plan))
    return rows


def table2_plan(plan: ExperimentPlan) -> ExperimentPlan:
    """The reproduction grid: n in {20,50}, lambda in {0,0.1,1},
    p in {0.6,0.75,0.9}, no intruder, the four named strategies."""
    return replace(plan, n_values=(20, 50), p_values=(0.6, 0.75, 0.9),
                   lambda_values=(0.0, 0.1, 1.0), q_values=(1.0,),
                   strategies=(KIND_RANDOM, KIND_A, KIND_B, KIND_C))


_GRID_KEYS = ("n", "p", "lambda", "q", "strategies")
_RUN_KEYS = ("trials", "seed", "max_rounds", "clock_offset", "tail_threshold")
_SWEEP_KEYS = ("n", "p", "lambda", "q", "base_n", "base_p", "base_lambda",
               "base_q")


def _split(raw: str) -> list:
    return [part.strip() for part in raw.split(",") if part.strip()]


def load_plan(path: str, base: ExperimentPlan | None = None) -> ExperimentPlan:
    """Read a plan file, overriding fields of `base` (defaults if None)."""
    plan = base or ExperimentPlan()
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise PlanError(f"cannot read plan file {path!r}")
    try:
        for section in parser.sections():
            if section not in ("grid", "run", "sweep"):
                raise PlanError(f"unknown section [{section}] in {path!r}")
            allowed = {"grid": _GRID_KEYS, "run": _RUN_KEYS,
                       "sweep": _SWEEP_KEYS}[section]
            for key, raw in parser.items(section):
                if key not in allowed:
                    raise PlanError(f"unknown key {key!r} in [{section}]")
                plan = _apply_key(plan, section, key, raw)
    except ValueError as exc:
        if isinstance(exc, PlanError):
            raise
        raise PlanError(f"bad value in {path!r}: {exc}") from exc
    return plan


def _apply_key(plan: ExperimentPlan, section: str, key: str,
               raw: str) -> ExperimentPlan:
    if section == "grid":
        if key == "n":
            return replace(plan, n_values=tuple(int(v) for v in _split(raw)))
        if key == "p":
            return replace(plan, p_values=tuple(float(v) for v in _split(raw)))
        if key == "lambda":
            return replace(plan,
                           lambda_values=tuple(float(v) for v in _split(raw)))
        if key == "q":
            return replace(plan, q_values=tuple(float(v) for v in _split(raw)))
        return replace(plan, strategies=tuple(
            parse_strategy(v, 0.5).kind for v in _split(raw)))
    if section == "run":
        if key == "trials":
            return replace(plan, trials=int(raw))
        if key == "seed":
            return replace(plan, seed=int(raw))
        if key == "max_rounds":
            return replace(plan, max_rounds=int(raw))
        if key == "clock_offset":
            return replace(plan, clock_offset=int(raw))
        return replace(plan, tail_rule=raw.strip())
    if key == "n":
        return replace(plan, sweep_n=tuple(int(v) for v in _split(raw)))
    if key == "p":
        return replace(plan, sweep_p=tuple(float(v) for v in _split(raw)))
    if key == "lambda":
        return replace(plan, sweep_lambda=tuple(float(v) for v in _split(raw)))
    if key == "q":
        return replace(plan, sweep_q=tuple(float(v) for v in _split(raw)))
    if key == "base_n":
        return replace(plan, base_n=int(raw))
    if key == "base_p":
        return replace(plan, base_p=float(raw))
    if key == "base_lambda":
        return replace(plan, base_lambda=float(raw))
    return replace(plan, base_q=float(raw))


def plan_comments(plan: ExperimentPlan, command: str,
                  extra: list | None = None) -> list:
    """The `# key = value` lines echoed at the top of every CSV.

    Output paths are deliberately not echoed so reruns into different
    files stay byte-identical.
    """

    def numlist(values):
        return ", ".join("%.6g" % v for v in values)

    items = [("command", command)]
    items += extra or []
    items += [
        ("trials", str(plan.trials)),
        ("seed", str(plan.seed)),
        ("max_rounds", str(plan.max_rounds)),
        ("clock_offset", str(plan.clock_offset)),
        ("tail_threshold", plan.tail_rule),
    ]
    if command in ("table2", "tail"):
        items += [("grid.n", numlist(plan.n_values))]
    if command == "table2":
        items += [("grid.p", numlist(plan.p_values)),
                  ("grid.lambda", numlist(plan.lambda_values)),
                  ("grid.q", numlist(plan.q_values)),
                  ("grid.strategies", ", ".join(plan.strategies))]
    if command == "tail":
        items += [("tail.p", "%.6g" % TAIL_P),
                  ("tail.strategies", ", ".join(TAIL_STRATEGIES))]
    if command == "sweep":
        items += [("grid.strategies", ", ".join(plan.strategies)),
                  ("base.n", str(plan.base_n)),
                  ("base.p", "%.6g" % plan.base_p),
                  ("base.lambda", "%.6g" % plan.base_lambda),
                  ("base.q", "%.6g" % plan.base_q)]
    return [f"# {key} = {value}" for key, value in items]


def write_csv(stream, comments: list, rows: list,
              columns: tuple = CSV_COLUMNS) -> None:
    for line in comments:
        stream.write(line + "\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
