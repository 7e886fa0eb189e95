"""Acceptance gate: the ten package-level criteria, one verdict line each.

Each test prints `[criterion NN] PASS/FAIL <numbers>` before asserting.
Verdict lines bypass pytest's capture (capfd.disabled) so the gate is
readable in any run mode; `pytest tests/test_acceptance.py -v` shows them
inline.

The full gate simulates tens of millions of trials and takes several
minutes; criteria 1-3 reproduce frozen reference means, 4-7 check the
structural guarantees against closed forms and the exact oracles, 8-10
cover asynchrony, the intruder, and determinism of the CSV harness.
"""

import math
import time

import numpy as np
import pytest

import crnsim.env as env_mod
from crnsim.cli import main as cli_main
from crnsim.engine import TrialConfig, _trial_arrays, run_batch, trial_rng
from crnsim.env import EnvSpec
from crnsim.experiments import Cell, ExperimentPlan, run_cell, sweep, tail_study
from crnsim.oracle import exact_ttr_markov
from crnsim.strategies import parse_strategy
from crnsim.theory import (
    expected_ttr_c_independent,
    per_round_upper_bound,
    restriction_interval,
)

TRIALS_LARGE = 1_000_000
TRIALS_SMALL = 100_000


@pytest.fixture()
def report(capfd):
    def _report(tag: str, ok: bool, detail: str) -> bool:
        verdict = "PASS" if ok else "FAIL"
        with capfd.disabled():
            print(f"\n[criterion {tag}] {verdict} {detail}", flush=True)
        return ok
    return _report


def batch(n, p_a, p_b, lam, kind, trials, seed, peer=None, offset=0,
          q=1.0, max_rounds=1_000_000):
    env = EnvSpec(n, p_a, p_b, lam, lam, intruder_q=q)
    s = parse_strategy(kind, peer)
    cfg = TrialConfig(env, s, s, clock_offset=offset, max_rounds=max_rounds,
                      seed=seed)
    return run_batch(cfg, trials)


@pytest.fixture(scope="module", autouse=True)
def warm_kernel():
    # pull the compiled trial loop out of the on-disk cache before any
    # timed criterion runs
    batch(3, 0.6, 0.6, 0.0, "B", 5, 0)
    batch(3, 0.6, 0.6, 1.0, "A", 5, 0, peer=0.6)
    batch(3, 0.6, 0.6, 0.5, "random", 5, 0, q=0.9)


def test_criterion_01_waiting_rule_reference_means(report):
    reference = {0.6: 2.599, 0.75: 1.716, 0.9: 1.214}
    t0 = time.perf_counter()
    means = {p: batch(20, p, p, 0.0, "B", TRIALS_LARGE, seed=101).mean_ttr
             for p in reference}
    elapsed = time.perf_counter() - t0
    in_band = {p: abs(means[p] - ref) <= 0.05 * ref
               for p, ref in reference.items()}
    ok = all(in_band.values()) and elapsed < 120.0
    detail = (", ".join(f"p={p}: {means[p]:.3f} (ref {reference[p]}, "
                        f"{'ok' if in_band[p] else 'off'})"
                        for p in reference)
              + f"; {elapsed:.0f}s for 3x10^6 trials")
    assert report("01", ok, detail)


def test_criterion_02_first_open_reference_means_and_closed_form(report):
    reference = {(20, 0.6): 2.308, (20, 0.75): 1.677, (20, 0.9): 1.217,
                 (50, 0.6): 2.299, (50, 0.75): 1.658, (50, 0.9): 1.222}
    bits = []
    ok = True
    for (n, p), ref in reference.items():
        stats = batch(n, p, p, 1.0, "C", TRIALS_LARGE, seed=102)
        closed = expected_ttr_c_independent(EnvSpec(n, p, p, 1.0, 1.0)).value
        near_ref = abs(stats.mean_ttr - ref) <= 0.05 * ref
        near_closed = abs(stats.mean_ttr - closed) <= 3 * stats.std_err
        ok = ok and near_ref and near_closed
        bits.append(f"n={n},p={p}: {stats.mean_ttr:.4f} "
                    f"(ref {ref}{'' if near_ref else ' off'}, "
                    f"closed {closed:.4f}{'' if near_closed else ' off'})")
    assert report("02", ok, "; ".join(bits))


def test_criterion_03_geometric_rule_reference_means(report):
    reference = {0.75: 21.196, 0.9: 14.006}
    bits = []
    ok = True
    for p, ref in reference.items():
        stats = batch(50, p, p, 0.0, "A", TRIALS_SMALL, seed=103, peer=p)
        good = abs(stats.mean_ttr - ref) <= 0.10 * ref
        ok = ok and good
        bits.append(f"p={p}: {stats.mean_ttr:.3f} (ref {ref} +-10%"
                    f"{'' if good else ' off'})")
    assert report("03", ok, "; ".join(bits))


def test_criterion_04_waiting_rule_guarantee(report):
    env = EnvSpec(20, 0.6, 0.6)
    spec = parse_strategy("B")
    cfg = TrialConfig(env, spec, spec, seed=104)
    status, ttr, _, _, _ = _trial_arrays(cfg, TRIALS_SMALL)
    met_all = bool((status == 0).all())
    bound_ok = True
    worst = 0
    for i in range(TRIALS_SMALL):
        a, b, _ = env_mod.sample_stable_pair(env, trial_rng(104, i))
        first_common = 1 + int(np.flatnonzero(a & b)[0])
        worst = max(worst, int(ttr[i]) - first_common)
        if ttr[i] > first_common:
            bound_ok = False
    stats = run_batch(cfg, TRIALS_SMALL)
    tail_zero = stats.frac_ge_threshold == 0.0 and stats.capped_count == 0
    ok = met_all and bound_ok and tail_zero
    assert report("04", ok,
                  f"10^5 trials: all met={met_all}, "
                  f"ttr<=first-common={bound_ok} (max slack {worst}), "
                  f"frac_ge_3n={stats.frac_ge_threshold}")


def test_criterion_05_per_round_bound_and_attainment(report):
    env = EnvSpec(20, 0.6, 0.6, 1.0, 1.0)
    bound = per_round_upper_bound(env).value
    freqs = {}
    for kind, peer in (("C", None), ("random", None), ("A", 0.6)):
        stats = batch(20, 0.6, 0.6, 1.0, kind, TRIALS_SMALL, seed=105,
                      peer=peer, max_rounds=1)
        freqs[kind] = (stats.trials - stats.capped_count) / stats.trials
    sig = {k: math.sqrt(max(f * (1 - f), 1e-12) / TRIALS_SMALL)
           for k, f in freqs.items()}
    below = {k: freqs[k] <= bound + 3 * sig[k] for k in freqs}
    attained = abs(freqs["C"] - bound) <= 3 * sig["C"]
    ok = all(below.values()) and attained
    assert report("05", ok,
                  f"bound={bound:.5f}; " +
                  ", ".join(f"{k}={freqs[k]:.5f}" for k in freqs) +
                  f"; C attains within 3 sigma: {attained}")


def test_criterion_06_oracle_equivalence(report):
    worst_z = 0.0
    worst_rel = 0.0
    cells = 0
    ok = True
    C = parse_strategy("C")
    for n in (2, 3, 4):
        for lam in (0.5, 1.0, 1.5):
            for p in (0.5, 0.7):
                if lam == 1.5 and p == 0.7:
                    continue  # beyond the factor cap 1/p
                env = EnvSpec(n, p, p, lam, lam)
                exact = exact_ttr_markov(env, C, C)
                stats = run_batch(TrialConfig(env, C, C, seed=106),
                                  TRIALS_LARGE)
                z = abs(stats.mean_ttr - exact) / stats.std_err
                worst_z = max(worst_z, z)
                ok = ok and z <= 3.0 and stats.capped_count == 0
                if lam == 1.0:
                    closed = expected_ttr_c_independent(env).value
                    rel = abs(exact - closed) / closed
                    worst_rel = max(worst_rel, rel)
                    ok = ok and rel <= 1e-10
                cells += 1
    assert report("06", ok,
                  f"{cells} cells x 10^6 trials: max |z|={worst_z:.2f} "
                  f"(<=3); hitting-time vs closed form at lambda=1: "
                  f"max rel err={worst_rel:.1e} (<=1e-10); "
                  f"3 cells skipped (lambda=1.5 invalid at p=0.7)")


def test_criterion_07_restriction_envelope(report):
    bits = []
    ok = True
    for lam in (0.1, 0.3, 0.5, 1.5):
        for p in (0.6, 0.75):
            if lam == 1.5 and p == 0.75:
                bits.append(f"l={lam},p={p}: skipped (factor cap 4/3)")
                continue
            env = EnvSpec(50, p, p, lam, lam)
            envelope = restriction_interval(env, eps=0.001)[1].value
            stats = batch(50, p, p, lam, "C", TRIALS_SMALL, seed=107)
            good = stats.mean_ttr <= envelope and stats.capped_count == 0
            ok = ok and good
            bits.append(f"l={lam},p={p}: {stats.mean_ttr:.2f}<="
                        f"{envelope:.1f}{'' if good else ' VIOLATED'}")
    assert report("07", ok, "; ".join(bits))


def test_criterion_08_clock_offset(report):
    bits = []
    ok = True
    for kind, peer in (("C", None), ("A", 0.6)):
        sync = batch(20, 0.6, 0.6, 1.0, kind, TRIALS_SMALL, seed=108,
                     peer=peer)
        async_ = batch(20, 0.6, 0.6, 1.0, kind, TRIALS_SMALL, seed=208,
                       peer=peer, offset=7)
        gap = abs(sync.mean_ttr - async_.mean_ttr)
        slack = 3 * math.hypot(sync.std_err, async_.std_err)
        good = gap <= slack
        ok = ok and good
        bits.append(f"{kind}: |{sync.mean_ttr:.4f}-{async_.mean_ttr:.4f}|"
                    f"<={slack:.4f}{'' if good else ' off'}")
    # the waiting rule has no asynchronous guarantee; record, don't assert
    b_sync = batch(20, 0.6, 0.6, 0.0, "B", 50_000, seed=308)
    b_async = batch(20, 0.6, 0.6, 0.0, "B", 50_000, seed=309, offset=7)
    bits.append(f"B recorded: mean {b_sync.mean_ttr:.2f}->"
                f"{b_async.mean_ttr:.2f}, capped {b_sync.capped_count}->"
                f"{b_async.capped_count} of 50000")
    assert report("08", ok, "; ".join(bits))


def test_criterion_09_intruder_sweep(report):
    # endpoint identity: the q=1 sweep rows equal no-intruder runs of the
    # same cells under the same master seed, byte for byte
    plan = ExperimentPlan(strategies=("B", "C"), trials=2000, seed=109)
    sweep_rows = sweep("q", plan)
    endpoint = [row for row in sweep_rows if row[6] == "1"]
    direct = [run_cell(Cell(30, 0.6, 0.6, 1.0, 1.0, 1.0, k, k), plan)
              for k in plan.strategies]
    identical = endpoint == direct

    # trend: mean TTR non-increasing in q (3 sigma slack per adjacent
    # pair) for the three rules of the intruder study at n=30, p=0.6
    legs = {}
    trend_ok = {}
    for kind, lam, peer in (("A", 0.0, 0.6), ("B", 0.0, None),
                            ("C", 1.0, None)):
        runs = [batch(30, 0.6, 0.6, lam, kind, TRIALS_SMALL, seed=109,
                      peer=peer, q=q) for q in (0.6, 0.75, 0.9, 1.0)]
        legs[kind] = runs
        good = True
        for lo, hi in zip(runs, runs[1:]):
            slack = 3 * math.hypot(lo.std_err, hi.std_err)
            if hi.mean_ttr > lo.mean_ttr + slack:
                good = False
        trend_ok[kind] = good
    ok = identical and all(trend_ok.values())
    detail = (f"q=1 endpoint bit-identical: {identical}; " +
              "; ".join(
                  f"{k} means " +
                  "/".join(f"{r.mean_ttr:.3f}" for r in legs[k]) +
                  (" non-increasing" if trend_ok[k] else " INCREASES with q")
                  for k in ("A", "B", "C")))
    if not trend_ok["A"] and trend_ok["B"] and trend_ok["C"] and identical:
        detail += ("; known limitation: renormalizing the truncated "
                   "geometric law concentrates both nodes' picks as the "
                   "intruder blocks channels, so the A rule speeds up at "
                   "low q instead of slowing down")
    assert report("09", ok, detail)


def test_criterion_10_deterministic_csv(tmp_path, report):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for path in paths:
        code = cli_main(["table2", "--seed", "42", "--trials", "300",
                         "--out", str(path)])
        assert code == 0
    identical = paths[0].read_bytes() == paths[1].read_bytes()
    assert report("10", identical,
                  f"table2 --seed 42 twice: byte-identical={identical} "
                  f"({paths[0].stat().st_size} bytes)")


def test_supplement_tail_ordering(report):
    # stand-in for the unreadable long-run figure: in stable environments
    # at p=0.6 the first-open rule's tail mass dominates the geometric
    # rule's, and both exceed the waiting rule's guaranteed zero
    plan = ExperimentPlan(n_values=(20,), trials=TRIALS_SMALL, seed=111)
    rows = tail_study(plan)
    frac = {row[0]: float(row[12]) for row in rows}
    ok = frac["C"] > frac["A"] > 0.0
    assert report("supplement", ok,
                  f"tail fractions at n=20: C={frac['C']:.4f} > "
                  f"A={frac['A']:.4f} > 0 (waiting rule pinned at 0 by "
                  f"criterion 04); random={frac['random']:.4f}")
