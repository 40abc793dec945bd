"""Core cake model: a 600-pixel strip with integer piecewise-constant valuations.

Cut positions are integer boundaries in 0..600; a cut at x splits the strip
into [0, x) and [x, 600). All pieces are half-open pixel intervals, and all
values are exact integers (no floats anywhere in the fairness arithmetic).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

WIDTH = 600


class Valuation:
    """Non-negative integer weight per pixel, with O(1) interval queries."""

    __slots__ = ("weights", "_prefix", "_hash")

    def __init__(self, weights):
        w = np.asarray(weights, dtype=np.int64)
        if w.shape != (WIDTH,):
            raise ValueError(f"expected {WIDTH} pixel weights, got shape {w.shape}")
        if (w < 0).any():
            raise ValueError("pixel weights must be non-negative")
        self.weights = w
        self.weights.setflags(write=False)
        self._prefix = np.concatenate(([0], np.cumsum(w)))
        self._hash = None

    @classmethod
    def from_blocks(cls, blocks):
        """Build from (start, end, weight) half-open pixel blocks; gaps weigh 0."""
        w = np.zeros(WIDTH, dtype=np.int64)
        for start, end, weight in blocks:
            w[start:end] = weight
        return cls(w)

    @classmethod
    def from_desired(cls, spans):
        """0/1 valuation that desires the given half-open pixel spans."""
        return cls.from_blocks([(a, b, 1) for a, b in spans])

    @property
    def total(self) -> int:
        return int(self._prefix[-1])

    def value(self, start: int, end: int) -> int:
        """Points held in [start, end)."""
        return int(self._prefix[end] - self._prefix[start])

    def __eq__(self, other):
        return isinstance(other, Valuation) and np.array_equal(self.weights, other.weights)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.weights.tobytes())
        return self._hash

    def __repr__(self):
        return f"Valuation(total={self.total})"


def value_of(v: Valuation, piece) -> int:
    """Value of the half-open interval `piece = (start, end)` under v."""
    start, end = piece
    if not (0 <= start <= end <= WIDTH):
        raise ValueError(f"piece {piece!r} outside the cake")
    return v.value(start, end)


def cut_point(v: Valuation, start: int, target: int) -> int:
    """Smallest boundary x >= start such that v([start, x)) >= target.

    A non-positive target is met at the left edge immediately. If the strip
    right of `start` holds less than `target`, the far edge is returned.
    """
    if target <= 0:
        return start
    goal = v._prefix[start] + target
    x = int(np.searchsorted(v._prefix, goal, side="left"))
    return min(max(x, start), WIDTH)


def piece_value(v: Valuation, intervals) -> int:
    """Value of a share made of several disjoint intervals."""
    return sum(v.value(s, e) for s, e in intervals)


@dataclass
class FairnessReport:
    """Outcome of auditing one allocation against a profile.

    envy_matrix[i][j] holds agent i's value of agent j's share;
    envious[i] is true when some j beats i's own share by more than
    the tolerance.
    """

    points: list
    envy_matrix: list
    proportional: list
    envious: list
    tolerance: int = 0
    shares: list = field(default_factory=list, repr=False)

    @property
    def any_envy(self) -> bool:
        return any(self.envious)


def audit(profile, allocation, tolerance: int = 0) -> FairnessReport:
    """Check an allocation for proportionality and envy at a point tolerance.

    `allocation` is a list of (start, end, agent) pieces; agents may hold
    several pieces (3SC shares are not contiguous). Proportionality is the
    exact integer test v_i(A_i) * n >= v_i(cake).
    """
    n = len(profile)
    shares = [[] for _ in range(n)]
    for start, end, agent in allocation:
        if not (0 <= start <= end <= WIDTH):
            raise ValueError(f"piece ({start}, {end}) outside the cake")
        shares[agent].append((start, end))
    for s in shares:
        s.sort()
    flat = sorted((s, e) for s, e in ((s, e) for sh in shares for s, e in sh))
    for (_, e0), (s1, _) in zip(flat, flat[1:]):
        if s1 < e0:
            raise ValueError("allocation pieces overlap")
    matrix = [[piece_value(v, shares[j]) for j in range(n)] for v in profile]
    points = [matrix[i][i] for i in range(n)]
    proportional = [points[i] * n >= profile[i].total for i in range(n)]
    envious = [
        any(matrix[i][j] > points[i] + tolerance for j in range(n) if j != i)
        for i in range(n)
    ]
    return FairnessReport(points, matrix, proportional, envious, tolerance, shares)


def validate_profile(profile, require_total=None):
    """Return a list of problems with a profile; an empty list means usable."""
    problems = []
    if len(profile) < 2:
        problems.append("profile needs at least two agents")
    for i, v in enumerate(profile):
        if not isinstance(v, Valuation):
            problems.append(f"agent {i}: not a Valuation")
            continue
        if v.total == 0:
            problems.append(f"agent {i}: zero total value")
        if require_total is not None and v.total != require_total:
            problems.append(f"agent {i}: total {v.total} != required {require_total}")
    return problems
