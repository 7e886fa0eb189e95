"""Channel-availability environments for two-node rendezvous simulation.

Each of the ``n`` licensed channels is, at every time slot, either open or
closed for a given node.  A node's availability is a boolean vector of length
``n`` (index 0 holds channel 1; channel ids are 1-based everywhere at the API
surface).  Per channel and node the open/closed status follows a two-state
Markov chain parameterised by the marginal open probability ``p`` and a
dynamic factor ``lam``:

    open  -> closed with probability lam * (1 - p)
    closed -> open  with probability lam * p

so the marginal open probability stays ``p`` at every slot.  Special values
of ``lam`` give the named regimes:

* ``lam = 0``   -- stable: availability is frozen after the first slot.
* ``lam = 1``   -- independent: every slot is a fresh Bernoulli(p) draw.
* ``lam = 2``   -- alternating: each channel flips status every slot
  (representable in the chain only when ``p = 0.5``; see
  ``EnvSpec.deterministic_flip`` for the general-p flip mode).
* other ``lam`` in (0, 2) -- general Markov dynamics.

An optional static intruder blocks each channel with probability ``1 - q``
for both nodes; the blocked set is drawn once per trial and never changes.

All sampling functions are pure given an explicit ``numpy.random.Generator``;
there is no module-level random state, so trials may run concurrently as long
as each owns its generator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Attempt budget for rejection-sampling a stable pair that shares a channel.
REJECTION_CAP = 1_000_000

# ChannelVector: shape (n,) bool ndarray; element j is channel j+1.
ChannelVector = np.ndarray


class NoCommonChannelError(RuntimeError):
    """Rejection sampling exhausted its attempt budget without finding a
    pair of availability vectors that share an open channel."""


def _check_prob(name: str, value: float, *, allow_one: bool = True) -> None:
    hi_ok = value <= 1.0 if allow_one else value < 1.0
    if not (0.0 < value and hi_ok):
        hi = "1" if allow_one else "1)"
        raise ValueError(f"{name} must lie in (0, {hi}], got {value!r}")


def max_dynamic_factor(p: float) -> float:
    """Largest dynamic factor compatible with marginal open probability p."""
    if p >= 1.0:
        return 0.0
    return min(1.0 / p, 1.0 / (1.0 - p))


@dataclass(frozen=True)
class EnvSpec:
    """Environment parameters shared by both nodes of a trial.

    ``p_a``/``p_b`` are the per-channel open probabilities of the two nodes,
    ``lambda_a``/``lambda_b`` their dynamic factors, and ``intruder_q`` the
    probability that the intruder leaves a channel unblocked (``q = 1`` means
    no intruder).  ``deterministic_flip`` selects the alternating regime for
    arbitrary ``p``: after a Bernoulli(p) first slot every channel flips
    status each round, so the marginal alternates between p and 1-p.
    """

    n: int
    p_a: float
    p_b: float
    lambda_a: float = 0.0
    lambda_b: float = 0.0
    intruder_q: float = 1.0
    deterministic_flip: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n!r}")
        _check_prob("p_a", self.p_a)
        _check_prob("p_b", self.p_b)
        _check_prob("intruder_q", self.intruder_q)
        # lam is meaningless when p = 1 (no closed channels to reopen).
        if self.p_a == 1.0:
            object.__setattr__(self, "lambda_a", 0.0)
        if self.p_b == 1.0:
            object.__setattr__(self, "lambda_b", 0.0)
        for name, lam, p in (("lambda_a", self.lambda_a, self.p_a),
                             ("lambda_b", self.lambda_b, self.p_b)):
            bound = max_dynamic_factor(p)
            if p < 1.0 and not (0.0 <= lam <= bound + 1e-12):
                raise ValueError(
                    f"{name}={lam!r} outside [0, {bound:.6g}] allowed by p={p!r}")
        if self.deterministic_flip and (self.lambda_a != 0.0 or self.lambda_b != 0.0):
            raise ValueError("deterministic_flip replaces the Markov dynamics; "
                             "set lambda_a = lambda_b = 0")

    # Per-channel transition rates of the two chains.
    @property
    def a0(self) -> float:
        return self.lambda_a * (1.0 - self.p_a)

    @property
    def a1(self) -> float:
        return self.lambda_a * self.p_a

    @property
    def b0(self) -> float:
        return self.lambda_b * (1.0 - self.p_b)

    @property
    def b1(self) -> float:
        return self.lambda_b * self.p_b

    @property
    def is_stable(self) -> bool:
        return (self.lambda_a == 0.0 and self.lambda_b == 0.0
                and not self.deterministic_flip)

    @property
    def has_intruder(self) -> bool:
        return self.intruder_q < 1.0


def sample_initial(p: float, n: int, rng: np.random.Generator) -> ChannelVector:
    """Draw a first-slot availability vector: each channel open independently
    with probability p."""
    _check_prob("p", p)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n!r}")
    return rng.random(n) < p


def evolve(state: ChannelVector, p: float, lam: float,
           rng: np.random.Generator) -> ChannelVector:
    """Advance one node's availability by one slot under the Markov dynamics.

    Open channels close with probability ``lam * (1 - p)``; closed channels
    open with probability ``lam * p``; channels evolve independently.  One
    uniform is consumed per channel whenever ``lam > 0``; ``lam = 0`` returns
    the state unchanged without consuming randomness.
    """
    _check_prob("p", p)
    if not (0.0 <= lam <= max_dynamic_factor(p) + 1e-12):
        raise ValueError(f"lam={lam!r} invalid for p={p!r}")
    if lam == 0.0:
        return state.copy()
    close_prob = lam * (1.0 - p)
    open_prob = lam * p
    u = rng.random(len(state))
    return np.where(state, u >= close_prob, u < open_prob)


def sample_intruder_mask(q: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw the static blocked-channel mask: each channel blocked with
    probability 1-q.  ``q = 1`` consumes no randomness."""
    _check_prob("q", q)
    if q == 1.0:
        return np.zeros(n, dtype=bool)
    return rng.random(n) >= q


def apply_intruder(state: ChannelVector, blocked: np.ndarray) -> ChannelVector:
    """Availability as seen by a node: open and not blocked."""
    if len(state) != len(blocked):
        raise ValueError(f"length mismatch: {len(state)} vs {len(blocked)}")
    return state & ~blocked


def sample_stable_pair(env: EnvSpec, rng: np.random.Generator,
                       blocked: np.ndarray | None = None,
                       ) -> tuple[ChannelVector, ChannelVector, int]:
    """Draw initial availability for both nodes of a stable trial,
    rejection-sampled until they share at least one open channel.

    Returns ``(alice, bob, rejected)`` where both vectors already have the
    intruder mask applied and ``rejected`` counts the discarded draws.  The
    mask is drawn here when not supplied.  Raises
    :class:`NoCommonChannelError` after ``REJECTION_CAP`` consecutive
    rejections (the parameters make a shared channel astronomically
    unlikely, e.g. the intruder blocked everything).
    """
    if not env.is_stable:
        raise ValueError("sample_stable_pair requires a stable environment "
                         "(lambda_a = lambda_b = 0, no flip mode)")
    if blocked is None:
        blocked = sample_intruder_mask(env.intruder_q, env.n, rng)
    rejected = 0
    while rejected < REJECTION_CAP:
        a = apply_intruder(sample_initial(env.p_a, env.n, rng), blocked)
        b = apply_intruder(sample_initial(env.p_b, env.n, rng), blocked)
        if (a & b).any():
            return a, b, rejected
        rejected += 1
    raise NoCommonChannelError(
        f"no common open channel after {REJECTION_CAP} attempts "
        f"(n={env.n}, p_a={env.p_a}, p_b={env.p_b}, q={env.intruder_q})")
