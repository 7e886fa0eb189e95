"""Closed-form reference quantities for the rendezvous strategies.

Covers the per-round success probability and expected TTR of the waiting
rule in stable environments, the first-open rule under independent
redraws, the universal per-round upper bound, two lower bounds, and the
mixing-based restriction interval for general Markov dynamics.  Everything
here is a pure function of the environment parameters; simulation and the
exact small-instance oracles are checked against these values in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .env import EnvSpec

RESULT_KINDS = ("per_round_prob", "expected_ttr", "lower_bound",
                "upper_bound", "restriction_interval")


@dataclass(frozen=True)
class TheoryResult:
    """A computed quantity plus what it is and under which assumptions.

    ``assumptions`` is a short free-text tag such as "finite n" or "n->inf"
    so tabulated output stays self-describing.
    """

    value: float
    kind: str
    assumptions: str

    def __post_init__(self):
        if self.kind not in RESULT_KINDS:
            raise ValueError(f"unknown result kind {self.kind!r}")
        if self.kind == "per_round_prob" and not (0.0 <= self.value <= 1.0):
            raise ValueError(f"per-round probability {self.value!r} outside [0,1]")
        if self.kind in ("expected_ttr", "restriction_interval") and self.value < 1.0:
            raise ValueError(f"{self.kind} must be >= 1, got {self.value!r}")


def _require_stable(env: EnvSpec, what: str) -> None:
    if not env.is_stable:
        raise ValueError(f"{what} applies to stable environments only "
                         f"(lambda_a={env.lambda_a!r}, lambda_b={env.lambda_b!r})")


def _require_independent(env: EnvSpec, what: str) -> None:
    if env.lambda_a != 1.0 or env.lambda_b != 1.0:
        raise ValueError(f"{what} applies to the independent regime only "
                         f"(needs lambda_a = lambda_b = 1)")


def prob_b_round(i: int, env: EnvSpec, asymptotic: bool = False) -> TheoryResult:
    """Success probability of round i when both nodes run the waiting rule
    in a stable environment.

    Finite n:  p_a p_b (1 - ((1-p_a)(1-p_b))^(n-i+1)) / (1 - (1-p_a)(1-p_b)),
    which counts the chance that the first common open channel at or after
    the window start is reached by both nodes this round.  The asymptotic
    variant drops the truncation: p_a p_b / (p_a + p_b - p_a p_b).
    """
    _require_stable(env, "prob_b_round")
    if not 1 <= i <= env.n:
        raise ValueError(f"round index {i!r} outside 1..{env.n}")
    pa, pb = env.p_a, env.p_b
    miss = (1.0 - pa) * (1.0 - pb)
    if asymptotic:
        return TheoryResult(pa * pb / (1.0 - miss), "per_round_prob", "n->inf")
    value = pa * pb * (1.0 - miss ** (env.n - i + 1)) / (1.0 - miss)
    return TheoryResult(value, "per_round_prob", "finite n")


def expected_ttr_b(env: EnvSpec) -> TheoryResult:
    """Asymptotic expected TTR of the waiting rule in a stable environment:
    (p_a + p_b - p_a p_b) / (p_a p_b).

    This is the n->inf estimate; finite-n simulated means sit above it
    (the per-round probability shrinks as the window nears channel n).
    """
    _require_stable(env, "expected_ttr_b")
    pa, pb = env.p_a, env.p_b
    value = (pa + pb - pa * pb) / (pa * pb)
    return TheoryResult(value, "expected_ttr", "n->inf")


def expected_ttr_btilde_envelope(env: EnvSpec) -> TheoryResult:
    """Upper envelope for the half-speed waiting rule: twice the waiting
    rule's expected TTR (its window reaches each channel at most one round
    later than twice the synchronous schedule)."""
    base = expected_ttr_b(env)
    return TheoryResult(2.0 * base.value, "expected_ttr",
                        "n->inf, upper envelope")


def expected_ttr_c_independent(env: EnvSpec, finite_n: bool = True) -> TheoryResult:
    """Expected TTR of the first-open rule when every round redraws
    availability independently (lambda = 1 for both nodes).

    Rounds are then iid with success probability
    P = p_a p_b (1 - ((1-p_a)(1-p_b))^n) / (1 - (1-p_a)(1-p_b)),
    so E[TTR] = 1/P; the asymptotic form is 1/p_a + 1/p_b - 1.
    """
    _require_independent(env, "expected_ttr_c_independent")
    pa, pb = env.p_a, env.p_b
    if not finite_n:
        return TheoryResult(1.0 / pa + 1.0 / pb - 1.0, "expected_ttr", "n->inf")
    p_round = per_round_upper_bound(env).value
    return TheoryResult(1.0 / p_round, "expected_ttr", "finite n")


def per_round_upper_bound(env: EnvSpec) -> TheoryResult:
    """Largest per-round rendezvous probability any strategy pair can reach
    under independent redraws: sum_i p_a p_b ((1-p_a)(1-p_b))^(i-1) over the
    n channels.  The first-open rule attains it exactly."""
    _require_independent(env, "per_round_upper_bound")
    pa, pb = env.p_a, env.p_b
    miss = (1.0 - pa) * (1.0 - pb)
    value = pa * pb * (1.0 - miss ** env.n) / (1.0 - miss)
    return TheoryResult(value, "per_round_prob", "finite n")


def lower_bounds(env: EnvSpec) -> tuple[TheoryResult, TheoryResult]:
    """Two expected-TTR lower bounds: 1/min(p_a, p_b) holds for every
    strategy in every environment; 1/(p_a p_b) is the scale no stationary
    strategy can beat in a stable environment (constant-free)."""
    pa, pb = env.p_a, env.p_b
    universal = TheoryResult(1.0 / min(pa, pb), "lower_bound", "any strategy")
    stationary = TheoryResult(1.0 / (pa * pb), "lower_bound",
                              "stationary strategy, stable env, scale only")
    return universal, stationary


def restriction_interval(env: EnvSpec, eps: float = 0.001,
                         ) -> tuple[TheoryResult, TheoryResult]:
    """Rounds for general Markov dynamics to forget the initial state, and
    the resulting expected-TTR envelope.

    R = max over nodes of ln(1/(eps p)) / ln(1/|1-lambda|): after R rounds
    each channel's open probability is within eps*p of the marginal p, so
    the process behaves like fresh draws sampled every R rounds.  The
    envelope R * (1/p_a + 1/p_b - 1) is an order-of-magnitude bound (eps
    absorbs constants); empirical means are only ever asserted to sit below
    it.  Rejected for lambda in {0, 2}: a frozen or perfectly periodic
    chain never mixes.  lambda = 1 mixes in a single step (R contribution 1).
    """
    if not (0.0 < eps < 1.0):
        raise ValueError(f"eps must be in (0, 1), got {eps!r}")
    if env.deterministic_flip:
        raise ValueError("restriction interval undefined for the flip regime "
                         "(periodic, never mixes)")
    r = 1.0
    for lam, p in ((env.lambda_a, env.p_a), (env.lambda_b, env.p_b)):
        if lam == 0.0 or lam == 2.0:
            raise ValueError(f"restriction interval undefined at lambda={lam!r}")
        if lam != 1.0:
            r = max(r, math.log(1.0 / (eps * p)) / math.log(1.0 / abs(1.0 - lam)))
    interval = TheoryResult(r, "restriction_interval", f"eps={eps:g}")
    envelope = TheoryResult(r * (1.0 / env.p_a + 1.0 / env.p_b - 1.0),
                            "upper_bound", f"eps={eps:g}, order of magnitude")
    return interval, envelope
