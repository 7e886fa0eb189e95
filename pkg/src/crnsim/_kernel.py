"""Compiled per-trial simulation kernel.

This is a speed twin of the pure-python trial loop in :mod:`crnsim.engine`
(``_trial_core``).  Both implementations must consume the random stream
draw-for-draw identically so that a trial run through either path yields the
same outcome bit for bit; the engine's test suite asserts exact equality.
Keep every ``rng.random()`` call site and every float operation in the
geometric rank scan in sync with ``env``/``strategies``.

numpy Generators pass straight into nopython code and draw from the same
underlying stream as in interpreted code, which is what makes the twin
arrangement possible.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .env import REJECTION_CAP

# Strategy kind codes used inside the kernel (order matches KINDS).
CODE_A = 0
CODE_B = 1
CODE_BTILDE = 2
CODE_C = 3
CODE_RANDOM = 4

# Trial status codes shared with the engine.
STATUS_OK = 0
STATUS_CAPPED = 1
STATUS_NO_COMMON = 2


@njit(cache=True, nogil=True)
def _select(kind, r, vis, round_index, n, rng):
    """One node's selection: 1-based channel id, 0 for none.

    Consumes exactly one uniform for the randomised kinds when at least one
    channel is visible, none otherwise; the window kinds draw nothing.
    """
    if kind == CODE_B or kind == CODE_BTILDE or kind == CODE_C:
        if kind == CODE_B:
            start = round_index
        elif kind == CODE_BTILDE:
            start = (round_index + 1) // 2
        else:
            start = 1
        if start < 1:
            start = 1
        for c in range(start - 1, n):
            if vis[c]:
                return c + 1
        return 0
    k = 0
    for c in range(n):
        if vis[c]:
            k += 1
    if k == 0:
        return 0
    u = rng.random()
    if kind == CODE_A:
        # Same two-pass mass scan as strategies.truncated_geometric_rank.
        decay = 1.0 - r
        total = 0.0
        mass = r
        for _ in range(k):
            total += mass
            mass *= decay
        target = u * total
        acc = 0.0
        mass = r
        rank = k
        for i in range(k):
            acc += mass
            if target < acc:
                rank = i + 1
                break
            mass *= decay
        seen = 0
        for c in range(n):
            if vis[c]:
                seen += 1
                if seen == rank:
                    return c + 1
        return 0
    idx = int(u * k)
    if idx >= k:
        idx = k - 1
    seen = 0
    for c in range(n):
        if vis[c]:
            if seen == idx:
                return c + 1
            seen += 1
    return 0


@njit(cache=True, nogil=True)
def run_trial_kernel(rng, n, p_a, p_b, lam_a, lam_b, q, flip,
                     kind_a, kind_b, r_a, r_b, offset, max_rounds):
    """Simulate one trial; returns (status, ttr, channel, no_common, rejected).

    ttr is -1 and channel 0 unless status == STATUS_OK.  no_common counts
    simulated rounds whose visible availability vectors had an empty
    intersection; rejected counts discarded stable initial draws.
    """
    blocked = np.zeros(n, np.bool_)
    if q < 1.0:
        for c in range(n):
            blocked[c] = rng.random() >= q

    a = np.empty(n, np.bool_)
    b = np.empty(n, np.bool_)
    stable = lam_a == 0.0 and lam_b == 0.0 and flip == 0
    rejected = 0
    if stable:
        while True:
            if rejected >= REJECTION_CAP:
                return STATUS_NO_COMMON, -1, 0, 0, rejected
            for c in range(n):
                a[c] = rng.random() < p_a
            for c in range(n):
                b[c] = rng.random() < p_b
            ok = False
            for c in range(n):
                if a[c] and b[c] and not blocked[c]:
                    ok = True
                    break
            if ok:
                break
            rejected += 1
    else:
        for c in range(n):
            a[c] = rng.random() < p_a
        for c in range(n):
            b[c] = rng.random() < p_b

    # Deterministic stationary pairs in non-mixing regimes repeat the same
    # selections forever; capping after one cycle preserves the outcome.
    static_cap = 0
    if kind_a == CODE_C and kind_b == CODE_C:
        if stable:
            static_cap = 1
        elif flip == 1:
            static_cap = 2

    close_a = lam_a * (1.0 - p_a)
    open_a = lam_a * p_a
    close_b = lam_b * (1.0 - p_b)
    open_b = lam_b * p_b
    vis_a = np.empty(n, np.bool_)
    vis_b = np.empty(n, np.bool_)
    no_common = 0

    for t in range(1, max_rounds + 1):
        ia = t
        ib = t + offset
        # A window rule past channel n selects nothing forever: capped now.
        if kind_a == CODE_B and ia > n:
            return STATUS_CAPPED, -1, 0, no_common, rejected
        if kind_a == CODE_BTILDE and (ia + 1) // 2 > n:
            return STATUS_CAPPED, -1, 0, no_common, rejected
        if kind_b == CODE_B and ib > n:
            return STATUS_CAPPED, -1, 0, no_common, rejected
        if kind_b == CODE_BTILDE and (ib + 1) // 2 > n:
            return STATUS_CAPPED, -1, 0, no_common, rejected
        if t > 1:
            if flip == 1:
                for c in range(n):
                    a[c] = not a[c]
                    b[c] = not b[c]
            else:
                if lam_a > 0.0:
                    for c in range(n):
                        u = rng.random()
                        a[c] = u >= close_a if a[c] else u < open_a
                if lam_b > 0.0:
                    for c in range(n):
                        u = rng.random()
                        b[c] = u >= close_b if b[c] else u < open_b
        for c in range(n):
            vis_a[c] = a[c] and not blocked[c]
            vis_b[c] = b[c] and not blocked[c]
        sel_a = _select(kind_a, r_a, vis_a, ia, n, rng)
        sel_b = _select(kind_b, r_b, vis_b, ib, n, rng)
        common = False
        for c in range(n):
            if vis_a[c] and vis_b[c]:
                common = True
                break
        if not common:
            no_common += 1
        if sel_a != 0 and sel_a == sel_b:
            return STATUS_OK, t, sel_a, no_common, rejected
        if static_cap != 0 and t >= static_cap:
            return STATUS_CAPPED, -1, 0, no_common, rejected
    return STATUS_CAPPED, -1, 0, no_common, rejected
