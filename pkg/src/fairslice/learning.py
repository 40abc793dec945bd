"""Repeated cut-and-choose against a fixed truthful chooser.

Watching which piece the opponent takes brackets their half-point h inside
an interval (s, t]; cuts outside the bracket are dominated by the violated
bound.  With a uniform prior on the bracket the planner trades off payoff
now against tighter bounds later, by backward induction over subintervals.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Optional

import numpy as np

from .cake import WIDTH, Valuation, cut_point

LEFT_TAKEN = "left_taken"
RIGHT_TAKEN = "right_taken"


def half_point(v: Valuation) -> int:
    """Minimal boundary whose left piece holds at least half of v's total.

    Lab totals are even so the left piece lands exactly on half; odd
    totals round the target up to the first boundary with a majority.
    """
    return cut_point(v, 0, -(-v.total // 2))


@dataclass(frozen=True)
class KnowledgeState:
    """Bounds on the opponent's half-point: h lies in (s, t]."""

    s: int = 0
    t: int = WIDTH

    def __post_init__(self):
        if not 0 <= self.s < self.t <= WIDTH:
            raise ValueError(f"need 0 <= s < t <= {WIDTH}, got ({self.s}, {self.t}]")

    @property
    def width(self) -> int:
        return self.t - self.s


def update(k: KnowledgeState, cut: int, observed: str) -> KnowledgeState:
    """Tighten the bounds after seeing which piece the opponent took.

    Taking the right piece means the cut fell short of the half-point
    (h > cut); taking the left piece means it reached it (h <= cut).
    Raises ValueError when the observation contradicts the bounds — a
    fixed truthful chooser cannot produce it.
    """
    if not 0 <= cut <= WIDTH:
        raise ValueError(f"cut {cut} outside [0, {WIDTH}]")
    if observed == RIGHT_TAKEN:
        s, t = max(k.s, cut), k.t
    elif observed == LEFT_TAKEN:
        s, t = k.s, min(k.t, cut)
    else:
        raise ValueError(f"observed must be {LEFT_TAKEN!r} or {RIGHT_TAKEN!r}")
    if s >= t:
        raise ValueError(
            f"observation {observed} at cut {cut} contradicts bounds ({k.s}, {k.t}]: "
            "the opponent is not a fixed truthful chooser"
        )
    return KnowledgeState(s, t)


class CutClass(NamedTuple):
    dominated: bool
    by: Optional[int]


def classify(k: KnowledgeState, cut: int) -> CutClass:
    """Dominated cuts sit outside the bracket; the violated bound beats them.

    Cutting left of s keeps the left piece either way but smaller than
    cutting at s would; cutting right of t mirrors this with t.
    """
    if cut < k.s:
        return CutClass(True, k.s)
    if cut > k.t:
        return CutClass(True, k.t)
    return CutClass(False, None)


def rationality_audit(trace) -> tuple:
    """Fraction of undominated cuts from round 2 on, and an all-clear flag.

    The first round is never judged (vacuous bounds dominate nothing).
    An observation that contradicts the running bounds marks a chooser
    that moved, so the bounds restart from scratch for later rounds.
    """
    k = KnowledgeState()
    judged = undominated = 0
    for index, (cut, observed) in enumerate(trace):
        if index > 0:
            judged += 1
            if not classify(k, cut).dominated:
                undominated += 1
        try:
            k = update(k, cut, observed)
        except ValueError:
            k = KnowledgeState()
    fraction = Fraction(undominated, judged) if judged else Fraction(1)
    return fraction, fraction == 1


def u_opt(v: Valuation, h: int) -> int:
    """Best guaranteed payoff once the half-point h is known exactly.

    Cut at h-1 to keep the largest left piece the opponent declines, or
    at h to push them onto the left piece and keep the right.
    """
    if not 0 <= h <= WIDTH:
        raise ValueError(f"half-point {h} outside [0, {WIDTH}]")
    return max(v.value(0, max(h - 1, 0)), v.value(h, WIDTH))


def u_mean(v: Valuation, x: int, k: KnowledgeState) -> Fraction:
    """Expected single-round payoff of cutting at x, h uniform on (s, t]."""
    if not k.s <= x <= k.t:
        raise ValueError(f"cut {x} outside the bracket [{k.s}, {k.t}]")
    num = (x - k.s) * v.value(x, WIDTH) + (k.t - x) * v.value(0, x)
    return Fraction(num, k.width)


def plan(v: Valuation, rounds_left: int, k: Optional[KnowledgeState] = None) -> tuple:
    """(first cut, expected total payoff) for the remaining horizon.

    Backward induction on knowledge subintervals: cutting at x inside
    (a, b] pays the right piece on the h <= x branch (shrinking the
    bracket to (a, x]) and the left piece otherwise (to (x, b]).  All
    interval values stay integral, so float64 tables are exact; the
    returned expectation is a Fraction over the bracket width.  Payoff
    ties resolve to the smallest cut.
    """
    if k is None:
        k = KnowledgeState()
    if rounds_left < 1:
        raise ValueError("need at least one round to plan for")

    m = k.width
    bounds = np.arange(k.s, k.t + 1)
    left = np.array([v.value(0, int(x)) for x in bounds], dtype=np.float64)
    right = np.array([v.value(int(x), WIDTH) for x in bounds], dtype=np.float64)
    offsets = np.arange(m + 1, dtype=np.float64)

    # table[i, j] = summed-over-h optimal value of bracket (s+i, s+j] for
    # the rounds handled so far; row/column i == j is the empty bracket
    table = np.zeros((m + 1, m + 1), dtype=np.float64)
    for _ in range(rounds_left - 1):
        nxt = np.zeros_like(table)
        # gain[x, j] = (j - x) * left[x] + table[x, j], the x-cut terms
        # that do not involve the bracket's lower end
        gain = (offsets[None, :] - offsets[:, None]) * left[:, None] + table
        for i in range(m + 1):
            rows = (offsets[i:] - i) * right[i:] + table[i, i:]
            running = np.maximum.accumulate(rows[:, None] + gain[i:], axis=0)
            cols = np.arange(i, m + 1)
            nxt[i, i:] = running[cols - i, cols]
        table = nxt

    candidates = offsets * right + (m - offsets) * left + table[0, :] + table[:, m]
    pick = int(np.argmax(candidates))
    return k.s + pick, Fraction(int(candidates[pick]), m)
