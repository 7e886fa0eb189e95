"""Per-round channel-selection rules.

A selection is the 1-based id of an open channel, or ``None`` when the rule
has nothing to pick (no open channel, or a time-adaptive window that has run
past channel ``n``).  Five rule kinds exist:

* ``"A"``      -- rank-biased random pick: the i-th open channel (by id) is
  chosen with geometric weight ``r * (1-r)**(i-1)``, ``r = peer_open_prob/6``,
  truncated and renormalised to the channels actually open.
* ``"B"``      -- waiting rule: at round ``i`` pick the first open channel
  with id >= i.  Whoever reaches the pair's first shared channel parks on it
  until the other side's window arrives.
* ``"Btilde"`` -- waiting rule with a half-speed window (starts at
  ``ceil(i/2)``), suited to alternating environments.
* ``"C"``      -- always the first open channel.
* ``"random"`` -- uniform over the open channels.

All functions are pure; randomised rules take an explicit generator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KIND_A = "A"
KIND_B = "B"
KIND_BTILDE = "Btilde"
KIND_C = "C"
KIND_RANDOM = "random"

KINDS = (KIND_A, KIND_B, KIND_BTILDE, KIND_C, KIND_RANDOM)

# Stationary rules ignore the round index and need no shared clock.
STATIONARY_KINDS = frozenset({KIND_A, KIND_C, KIND_RANDOM})

# Untruncated per-rank mass for kind A is peer_open_prob / GEOMETRIC_DIVISOR.
GEOMETRIC_DIVISOR = 6.0


@dataclass(frozen=True)
class StrategySpec:
    """A selection rule plus its parameters.

    ``peer_open_prob`` is required for kind ``"A"`` only: it is the *other*
    node's channel-open probability, which that rule needs to shape its
    geometric weights.  Other kinds ignore it.
    """

    kind: str
    peer_open_prob: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}; "
                             f"expected one of {KINDS}")
        if self.kind == KIND_A:
            if self.peer_open_prob is None or not (0.0 < self.peer_open_prob <= 1.0):
                raise ValueError("kind 'A' needs peer_open_prob in (0, 1], "
                                 f"got {self.peer_open_prob!r}")

    @property
    def is_stationary(self) -> bool:
        return self.kind in STATIONARY_KINDS

    @property
    def is_deterministic(self) -> bool:
        return self.kind in (KIND_B, KIND_BTILDE, KIND_C)


def parse_strategy(kind: str, peer_open_prob: float | None = None) -> StrategySpec:
    """Build a StrategySpec from the config-file spelling of a kind."""
    canonical = {k.lower(): k for k in KINDS}
    try:
        kind = canonical[kind.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown strategy kind {kind!r}; "
                         f"expected one of {KINDS}") from None
    return StrategySpec(kind, peer_open_prob if kind == KIND_A else None)


def first_open_at_or_after(state: np.ndarray, start: int) -> int | None:
    """Lowest id of an open channel with id >= start, or None."""
    if start > len(state):
        return None
    start = max(start, 1)
    window = state[start - 1:]
    if not window.any():
        return None
    return start + int(np.argmax(window))


def truncated_geometric_rank(u: float, r: float, k: int) -> int:
    """Map a uniform draw to a rank in 1..k under the renormalised geometric
    law with untruncated success parameter r.

    Implemented as a linear scan of the mass table so that the arithmetic is
    a fixed sequence of multiplies and adds (reproduced verbatim by the
    compiled simulation kernel; keep the two in sync).
    """
    decay = 1.0 - r
    total = 0.0
    mass = r
    for _ in range(k):
        total += mass
        mass *= decay
    target = u * total
    acc = 0.0
    mass = r
    for i in range(k):
        acc += mass
        if target < acc:
            return i + 1
        mass *= decay
    return k


def choose_a(state: np.ndarray, peer_open_prob: float,
             rng: np.random.Generator) -> int | None:
    """Kind "A": pick the i-th open channel with truncated-geometric weight
    proportional to r*(1-r)**(i-1), r = peer_open_prob/6."""
    if not (0.0 < peer_open_prob <= 1.0):
        raise ValueError(f"peer_open_prob must be in (0, 1], got {peer_open_prob!r}")
    open_ids = np.flatnonzero(state)
    k = len(open_ids)
    if k == 0:
        return None
    rank = truncated_geometric_rank(rng.random(), peer_open_prob / GEOMETRIC_DIVISOR, k)
    return int(open_ids[rank - 1]) + 1


def choose_b(state: np.ndarray, round_index: int) -> int | None:
    """Kind "B": first open channel with id >= round_index."""
    if round_index < 1:
        raise ValueError(f"round_index must be >= 1, got {round_index!r}")
    return first_open_at_or_after(state, round_index)


def choose_btilde(state: np.ndarray, round_index: int) -> int | None:
    """Kind "Btilde": first open channel with id >= ceil(round_index/2)."""
    if round_index < 1:
        raise ValueError(f"round_index must be >= 1, got {round_index!r}")
    return first_open_at_or_after(state, (round_index + 1) // 2)


def choose_c(state: np.ndarray) -> int | None:
    """Kind "C": first open channel, independent of the round."""
    return first_open_at_or_after(state, 1)


def choose_random(state: np.ndarray, rng: np.random.Generator) -> int | None:
    """Uniform pick among the open channels."""
    open_ids = np.flatnonzero(state)
    k = len(open_ids)
    if k == 0:
        return None
    idx = int(rng.random() * k)
    if idx >= k:  # guard the u -> 1.0 float edge
        idx = k - 1
    return int(open_ids[idx]) + 1


def select(spec: StrategySpec, state: np.ndarray, round_index: int,
           rng: np.random.Generator) -> int | None:
    """Dispatch one round's selection for the given rule."""
    if spec.kind == KIND_A:
        return choose_a(state, spec.peer_open_prob, rng)
    if spec.kind == KIND_B:
        return choose_b(state, round_index)
    if spec.kind == KIND_BTILDE:
        return choose_btilde(state, round_index)
    if spec.kind == KIND_C:
        return choose_c(state)
    return choose_random(state, rng)
