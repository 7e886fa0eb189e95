"""Command-line interface.

Subcommands:

* ``simulate``  -- one Monte Carlo cell with explicit parameters.
* ``table2``    -- the strategy-performance reproduction grid.
* ``tail``      -- tail fractions (TTR >= 3n) of the stationary strategies
  in stable environments.
* ``sweep``     -- one-dimensional sweep over n, p, lambda, or q.
* ``theory``    -- closed-form values applicable to the given parameters.
* ``oracle``    -- exact small-instance expected TTR (n <= 6).

All commands write CSV (stdout, or ``--out``) with the effective settings
echoed as ``#`` comments.  The exit code is nonzero only for invalid plans
or parameters; per-cell simulation failures are recorded in the CSV's
``error`` column instead.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import experiments as exp
from . import oracle as oracle_mod
from . import theory as theory_mod
from .env import EnvSpec
from .experiments import Cell, ExperimentPlan, PlanError
from .strategies import KIND_A, parse_strategy


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", metavar="PATH",
                     help="plan file ([grid]/[run]/[sweep] sections)")
    sub.add_argument("--seed", type=int, help="master seed")
    sub.add_argument("--trials", type=int, help="trials per cell")
    sub.add_argument("--out", metavar="PATH.csv",
                     help="output file (default stdout)")
    sub.add_argument("--max-rounds", type=int, dest="max_rounds",
                     help="per-trial round cap")


def _add_cell_params(sub: argparse.ArgumentParser, strategies: bool) -> None:
    sub.add_argument("--n", type=int, required=True, help="channel count")
    sub.add_argument("--p", type=float, required=True,
                     help="open probability (both nodes unless --p-b)")
    sub.add_argument("--p-b", type=float, dest="p_b",
                     help="Bob's open probability")
    sub.add_argument("--lam", type=float, default=0.0,
                     help="dynamic factor; 2 selects the flip regime")
    sub.add_argument("--lam-b", type=float, dest="lam_b",
                     help="Bob's dynamic factor")
    if strategies:
        sub.add_argument("--strat-a", default="B", help="Alice's strategy")
        sub.add_argument("--strat-b", default="B", help="Bob's strategy")
        sub.add_argument("--peer-p-a", type=float, dest="peer_p_a",
                         help="peer open probability for Alice's geometric "
                              "rule (default: Bob's p)")
        sub.add_argument("--peer-p-b", type=float, dest="peer_p_b",
                         help="peer open probability for Bob's geometric "
                              "rule (default: Alice's p)")


def _effective_plan(args) -> ExperimentPlan:
    plan = ExperimentPlan()
    if args.config:
        plan = exp.load_plan(args.config, plan)
    overrides = {}
    for field in ("seed", "trials", "max_rounds"):
        value = getattr(args, field, None)
        if value is not None:
            overrides[field] = value
    if overrides:
        plan = replace(plan, **overrides)
    return plan


def _emit(out: str | None, comments: list, rows: list,
          columns=exp.CSV_COLUMNS) -> None:
    if out is None:
        exp.write_csv(sys.stdout, comments, rows, columns)
    else:
        with open(out, "w", newline="") as stream:
            exp.write_csv(stream, comments, rows, columns)


def _cmd_simulate(args) -> int:
    plan = _effective_plan(args)
    if args.offset is not None:
        plan = replace(plan, clock_offset=args.offset)
    exp.validate_plan(plan)
    p_b = args.p if args.p_b is None else args.p_b
    lam_b = args.lam if args.lam_b is None else args.lam_b
    kind_a = parse_strategy(args.strat_a, args.peer_p_a or 0.5).kind
    kind_b = parse_strategy(args.strat_b, args.peer_p_b or 0.5).kind
    cell = Cell(args.n, args.p, p_b, args.lam, lam_b, args.q,
                kind_a, kind_b, plan.clock_offset,
                args.peer_p_a, args.peer_p_b)
    row = exp.run_cell(cell, plan, skip_stable_c=False)
    extra = [("n", str(args.n)), ("p_a", "%.6g" % args.p),
             ("p_b", "%.6g" % p_b), ("lambda_a", "%.6g" % args.lam),
             ("lambda_b", "%.6g" % lam_b), ("q", "%.6g" % args.q),
             ("strategies", f"{kind_a}+{kind_b}")]
    _emit(args.out, exp.plan_comments(plan, "simulate", extra), [row])
    return 0


def _cmd_table2(args) -> int:
    plan = exp.table2_plan(_effective_plan(args))
    rows = exp.run_plan(plan)
    _emit(args.out, exp.plan_comments(plan, "table2"), rows)
    return 0


def _cmd_tail(args) -> int:
    plan = _effective_plan(args)
    rows = exp.tail_study(plan)
    _emit(args.out, exp.plan_comments(plan, "tail"), rows)
    return 0


def _cmd_sweep(args) -> int:
    plan = _effective_plan(args)
    values = exp.sweep_values(args.dim, plan)
    rows = exp.sweep(args.dim, plan)
    extra = [("dim", args.dim),
             ("values", ", ".join("%.6g" % v for v in values))]
    _emit(args.out, exp.plan_comments(plan, "sweep", extra), rows)
    return 0


def _theory_rows(n: int, p_a: float, p_b: float, lam_a: float, lam_b: float,
                 eps: float) -> list:
    def fmt(result):
        return ["%.6g" % result.value, result.kind, result.assumptions]

    flip = lam_a == exp.FLIP_LAMBDA or lam_b == exp.FLIP_LAMBDA
    env = EnvSpec(n=n, p_a=p_a, p_b=p_b,
                  lambda_a=0.0 if flip else lam_a,
                  lambda_b=0.0 if flip else lam_b,
                  deterministic_flip=flip)
    rows = []
    universal, stationary = theory_mod.lower_bounds(env)
    rows.append(["lower_bound_universal"] + fmt(universal))
    rows.append(["lower_bound_stationary_scale"] + fmt(stationary))
    if env.is_stable:
        rows.append(["prob_b_round_1"] + fmt(theory_mod.prob_b_round(1, env)))
        rows.append(["prob_b_round_asymptotic"]
                    + fmt(theory_mod.prob_b_round(1, env, asymptotic=True)))
        rows.append(["expected_ttr_b"] + fmt(theory_mod.expected_ttr_b(env)))
        rows.append(["expected_ttr_btilde_envelope"]
                    + fmt(theory_mod.expected_ttr_btilde_envelope(env)))
    if lam_a == 1.0 and lam_b == 1.0:
        rows.append(["expected_ttr_c"]
                    + fmt(theory_mod.expected_ttr_c_independent(env)))
        rows.append(["expected_ttr_c_asymptotic"] + fmt(
            theory_mod.expected_ttr_c_independent(env, finite_n=False)))
        rows.append(["per_round_upper_bound"]
                    + fmt(theory_mod.per_round_upper_bound(env)))
    if not flip and 0.0 < lam_a < 2.0 and 0.0 < lam_b < 2.0:
        interval, envelope = theory_mod.restriction_interval(env, eps)
        rows.append(["restriction_interval"] + fmt(interval))
        rows.append(["restriction_envelope"] + fmt(envelope))
    return rows


def _cmd_theory(args) -> int:
    p_b = args.p if args.p_b is None else args.p_b
    lam_b = args.lam if args.lam_b is None else args.lam_b
    rows = _theory_rows(args.n, args.p, p_b, args.lam, lam_b, args.eps)
    extra = [("n", str(args.n)), ("p_a", "%.6g" % args.p),
             ("p_b", "%.6g" % p_b), ("lambda_a", "%.6g" % args.lam),
             ("lambda_b", "%.6g" % lam_b), ("eps", "%.6g" % args.eps)]
    comments = [f"# {key} = {value}" for key, value in
                [("command", "theory")] + extra]
    _emit(args.out, comments, rows,
          columns=("name", "value", "kind", "assumptions"))
    return 0


def _cmd_oracle(args) -> int:
    p_b = args.p if args.p_b is None else args.p_b
    lam_b = args.lam if args.lam_b is None else args.lam_b
    env = EnvSpec(n=args.n, p_a=args.p, p_b=p_b,
                  lambda_a=args.lam, lambda_b=lam_b)
    strat_a = parse_strategy(args.strat_a,
                             args.peer_p_a if args.peer_p_a else p_b)
    strat_b = parse_strategy(args.strat_b,
                             args.peer_p_b if args.peer_p_b else args.p)
    if env.is_stable:
        method = "stable_enumeration"
        value, divergent = oracle_mod.exact_ttr_stable(env, strat_a, strat_b)
        div_text = "%.6g" % divergent
    else:
        method = "markov_hitting_time"
        value = oracle_mod.exact_ttr_markov(env, strat_a, strat_b)
        div_text = ""
    label = (strat_a.kind if strat_a.kind == strat_b.kind
             else f"{strat_a.kind}+{strat_b.kind}")
    row = [method, str(args.n), "%.6g" % args.p, "%.6g" % p_b,
           "%.6g" % args.lam, "%.6g" % lam_b, label, "%.10g" % value,
           div_text]
    comments = ["# command = oracle"]
    _emit(args.out, comments, [row],
          columns=("method", "n", "p_a", "p_b", "lambda_a", "lambda_b",
                   "strategy", "exact_ttr", "divergent_mass"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crnsim",
        description="Two-node blind rendezvous simulation toolkit")
    subs = parser.add_subparsers(dest="command", required=True)

    sim = subs.add_parser("simulate", help="run one Monte Carlo cell")
    _add_cell_params(sim, strategies=True)
    sim.add_argument("--q", type=float, default=1.0,
                     help="intruder leave-open probability (1 = none)")
    sim.add_argument("--offset", type=int,
                     help="Bob's clock offset in rounds")
    _add_common(sim)
    sim.set_defaults(func=_cmd_simulate)

    t2 = subs.add_parser("table2", help="strategy-performance grid")
    _add_common(t2)
    t2.set_defaults(func=_cmd_table2)

    tail = subs.add_parser("tail", help="tail fractions in stable envs")
    _add_common(tail)
    tail.set_defaults(func=_cmd_tail)

    sw = subs.add_parser("sweep", help="sweep one parameter")
    sw.add_argument("--dim", required=True, choices=exp.SWEEP_DIMS)
    _add_common(sw)
    sw.set_defaults(func=_cmd_sweep)

    th = subs.add_parser("theory", help="closed-form reference values")
    _add_cell_params(th, strategies=False)
    th.add_argument("--eps", type=float, default=0.001,
                    help="restriction-interval tolerance")
    th.add_argument("--out", metavar="PATH.csv")
    th.set_defaults(func=_cmd_theory)

    orc = subs.add_parser("oracle", help="exact small-instance expected TTR")
    _add_cell_params(orc, strategies=True)
    orc.add_argument("--out", metavar="PATH.csv")
    orc.set_defaults(func=_cmd_oracle)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (PlanError, ValueError) as exc:
        print(f"crnsim: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
