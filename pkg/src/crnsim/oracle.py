"""Exact small-instance ground truth for the rendezvous simulation.

Two independent computations, both limited to n <= 6 channels so the
4^n joint state space stays tiny:

* :func:`exact_ttr_stable` enumerates every pair of initial availability
  vectors of a stable environment, unrolls the deterministic strategies
  round by round, and averages TTR over the Bernoulli weights,
  conditioning on a common open channel existing (mirroring the
  rejection sampling of the simulator).
* :func:`exact_ttr_markov` treats the two nodes' joint availability as a
  4^n-state Markov chain, computes each state's one-round rendezvous
  probability from the stationary strategies' selection distributions, and
  solves the expected-hitting-time linear system started from the
  stationary product-Bernoulli distribution.

Both model the synchronous, intruder-free case (clock offset 0, q = 1);
environments with an intruder share a blocked mask between the nodes,
which neither formulation represents.
"""

from __future__ import annotations

import numpy as np

from .env import EnvSpec
from . import strategies as strat_mod
from .strategies import StrategySpec

MAX_ORACLE_N = 6


def _check_supported(env: EnvSpec) -> None:
    if env.n > MAX_ORACLE_N:
        raise ValueError(f"oracle supports n <= {MAX_ORACLE_N}, got {env.n}")
    if env.has_intruder:
        raise ValueError("oracle supports q = 1 only (shared intruder mask "
                         "correlates the nodes)")


def _bits_to_state(bits: int, n: int) -> np.ndarray:
    return np.array([(bits >> c) & 1 == 1 for c in range(n)])


def _weight(bits: int, n: int, p: float) -> float:
    w = 1.0
    for c in range(n):
        w *= p if (bits >> c) & 1 else 1.0 - p
    return w


def enumerate_stable(env: EnvSpec, strat_a: StrategySpec, strat_b: StrategySpec,
                     ) -> tuple[list[tuple[int, int, float, int | None, int]], float]:
    """Exhaustive unroll of all initial joint states with a common channel.

    Returns (records, common_mass): one record per joint state as
    (a_bits, b_bits, weight, ttr or None, first_common_channel), weights
    unnormalised, plus the total probability mass of states that have a
    common open channel.  ttr None marks states that never rendezvous.
    The per-state data lets tests check the waiting rule's guarantee
    (ttr never exceeds the first common channel) exhaustively.
    """
    _check_supported(env)
    if not env.is_stable:
        raise ValueError("exact_ttr_stable requires a stable environment")
    for s in (strat_a, strat_b):
        if not s.is_deterministic:
            raise ValueError(f"strategy kind {s.kind!r} is randomized; "
                             "use exact_ttr_markov")
    n = env.n
    # Window rules are silent past round 2n; first-open is constant; so any
    # state not met by round 2n+1 never meets.
    horizon = 2 * n + 1
    records = []
    common_mass = 0.0
    for a_bits in range(1 << n):
        wa = _weight(a_bits, n, env.p_a)
        a_state = _bits_to_state(a_bits, n)
        for b_bits in range(1 << n):
            if a_bits & b_bits == 0:
                continue
            w = wa * _weight(b_bits, n, env.p_b)
            common_mass += w
            b_state = _bits_to_state(b_bits, n)
            first_common = ((a_bits & b_bits) & -(a_bits & b_bits)).bit_length()
            ttr = None
            rng = None  # deterministic kinds never draw
            for t in range(1, horizon + 1):
                sel_a = strat_mod.select(strat_a, a_state, t, rng)
                sel_b = strat_mod.select(strat_b, b_state, t, rng)
                if sel_a is not None and sel_a == sel_b:
                    ttr = t
                    break
            records.append((a_bits, b_bits, w, ttr, first_common))
    return records, common_mass


def exact_ttr_stable(env: EnvSpec, strat_a: StrategySpec, strat_b: StrategySpec,
                     ) -> tuple[float, float]:
    """Exact expected TTR of deterministic strategies in a stable
    environment, conditioned on a common open channel.

    Returns (expected_ttr, divergent_mass): the mean over the states that
    do rendezvous, and the conditional probability of a state that never
    does (the simulator reports those as capped trials)."""
    records, common_mass = enumerate_stable(env, strat_a, strat_b)
    met_mass = 0.0
    met_sum = 0.0
    for _, _, w, ttr, _ in records:
        if ttr is not None:
            met_mass += w
            met_sum += w * ttr
    divergent = max(0.0, 1.0 - met_mass / common_mass)
    expected = met_sum / met_mass if met_mass > 0.0 else float("nan")
    return expected, divergent


def _selection_matrix(spec: StrategySpec, n: int) -> np.ndarray:
    """P(select channel c+1 | availability bits) for a stationary strategy,
    shape (2^n, n); rows of all-closed states are zero (silent node)."""
    out = np.zeros((1 << n, n))
    for bits in range(1 << n):
        open_ids = [c for c in range(n) if (bits >> c) & 1]
        k = len(open_ids)
        if k == 0:
            continue
        if spec.kind == strat_mod.KIND_C:
            out[bits, open_ids[0]] = 1.0
        elif spec.kind == strat_mod.KIND_RANDOM:
            out[bits, open_ids] = 1.0 / k
        elif spec.kind == strat_mod.KIND_A:
            r = spec.peer_open_prob / strat_mod.GEOMETRIC_DIVISOR
            mass = np.array([r * (1.0 - r) ** i for i in range(k)])
            out[bits, open_ids] = mass / mass.sum()
        else:
            raise ValueError(f"strategy kind {spec.kind!r} is time-adaptive; "
                             "use exact_ttr_stable")
    return out


def _node_transition(n: int, p: float, lam: float) -> np.ndarray:
    """One node's joint availability transition matrix over 2^n states.

    All channels of a node share (p, lam), so the chain is exchangeable in
    the channels and the kron bit order need not match the channel-id bit
    order used elsewhere.
    """
    a0 = lam * (1.0 - p)  # open -> closed
    a1 = lam * p          # closed -> open
    per_channel = np.array([[1.0 - a1, a1],
                            [a0, 1.0 - a0]])
    t = np.ones((1, 1))
    for _ in range(n):
        t = np.kron(t, per_channel)
    return t


def _node_stationary(n: int, p: float) -> np.ndarray:
    pi = np.ones(1)
    for _ in range(n):
        pi = np.kron(pi, np.array([1.0 - p, p]))
    return pi


def exact_ttr_markov(env: EnvSpec, strat_a: StrategySpec, strat_b: StrategySpec,
                     ) -> float:
    """Exact expected TTR for stationary strategies under Markov dynamics.

    Builds the joint 4^n transition matrix from the per-channel rates,
    takes the per-state rendezvous probability s(x) from the two selection
    distributions, and solves (I - diag(1-s) T) g = 1; the answer is the
    stationary average of g.  Requires 0 < lambda < 2 on both nodes so the
    chain is ergodic and the system nonsingular."""
    _check_supported(env)
    for lam in (env.lambda_a, env.lambda_b):
        if not 0.0 < lam < 2.0:
            raise ValueError(f"exact_ttr_markov needs 0 < lambda < 2, got {lam!r}")
    n = env.n
    sel_a = _selection_matrix(strat_a, n)
    sel_b = _selection_matrix(strat_b, n)
    s = (sel_a @ sel_b.T).reshape(-1)  # joint index = a_bits * 2^n + b_bits

    t_joint = np.kron(_node_transition(n, env.p_a, env.lambda_a),
                      _node_transition(n, env.p_b, env.lambda_b))
    size = 1 << (2 * n)
    system = np.eye(size) - (1.0 - s)[:, None] * t_joint
    g = np.linalg.solve(system, np.ones(size))
    pi = np.kron(_node_stationary(n, env.p_a), _node_stationary(n, env.p_b))
    return float(pi @ g)
