"""Query-driven engines for the six division procedures.

Each procedure runs as a resumable state machine: the machine emits a Query
naming an agent and the decision it owes, the caller supplies that agent's
action, and the machine advances until the allocation is complete. Policies
(agent strategies) live outside the machine — the machine itself never sees
a valuation, which is what keeps hidden information hidden in the lab server.

Agent 0 plays the human subject's seat from the experiment: the single
cutter in 2ACC, the first cutter in 2SCC, the lowest-index participant in
the n-agent procedures, and the three-piece divider in 3SC.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .cake import WIDTH, Valuation, cut_point, piece_value, validate_profile

FAMILIES = ("acc", "scc", "ds", "ld", "ep", "sc")


def split_procedure(procedure: str):
    """'4ld' -> (4, 'ld'), validating the id."""
    digits = ""
    for ch in procedure:
        if ch.isdigit():
            digits += ch
        else:
            break
    family = procedure[len(digits):]
    if not digits or family not in FAMILIES:
        raise ValueError(f"unknown procedure {procedure!r}")
    n = int(digits)
    if family in ("acc", "scc") and n != 2:
        raise ValueError(f"{procedure}: cut-and-choose variants take 2 agents")
    if family == "sc" and n != 3:
        raise ValueError(f"{procedure}: the trimming procedure takes 3 agents")
    if n < 2:
        raise ValueError(f"{procedure}: need at least 2 agents")
    return n, family


def agents_for(procedure: str) -> int:
    return split_procedure(procedure)[0]


@dataclass(frozen=True)
class Query:
    """One pending decision: which agent must act, and on what."""

    agent: int
    kind: str                    # cut | cut2 | choose | diminish | trim | pick | split
    procedure: str
    n_agents: int
    left: int = 0
    right: int = WIDTH
    stage: int = 1
    group_size: int = 0          # agents still involved in this decision
    standing: int | None = None  # current candidate boundary (diminish only)
    pieces: tuple = ()           # candidate shares, each a tuple of (s, e) intervals
    trimmed_index: int | None = None


@dataclass
class RoundTrace:
    """Everything needed to replay one run bit-exactly."""

    procedure: str
    n_agents: int
    subject_role: int
    actions: list = field(default_factory=list)      # (agent, kind, value)
    allocation: list = field(default_factory=list)   # (start, end, agent)


class ProtocolError(ValueError):
    """An action that the pending query cannot accept."""


def _subtract_holes(start, end, holes):
    """[start, end) minus single-pixel holes -> list of intervals."""
    out = []
    cursor = start
    for h in holes:
        if h > cursor:
            out.append((cursor, h))
        cursor = h + 1
    if end > cursor:
        out.append((cursor, end))
    return out


class Machine:
    """A single live run of one procedure."""

    def __init__(self, procedure: str, n_agents: int | None = None):
        n, family = split_procedure(procedure)
        if n_agents is not None and n_agents != n:
            raise ValueError(f"{procedure} needs {n} agents, got {n_agents}")
        self.procedure = procedure
        self.n_agents = n
        self.family = family
        self.allocation = []
        self.actions = []
        self._pending = None
        self._done = False
        program = getattr(self, "_program_" + family)
        self._gen = program()

    # -- driving ----------------------------------------------------------

    def start(self) -> Query:
        if self._pending is not None or self._done:
            raise ProtocolError("machine already started")
        self._pending = next(self._gen)
        return self._pending

    def step(self, action):
        """Feed the pending agent's action; returns the next Query or None."""
        if self._done:
            raise ProtocolError("procedure already finished")
        if self._pending is None:
            raise ProtocolError("machine not started")
        q = self._pending
        self._validate(q, action)
        self.actions.append((q.agent, q.kind, action))
        try:
            self._pending = self._gen.send(action)
        except StopIteration:
            self._pending = None
            self._done = True
            self.allocation.sort()
        return self._pending

    @property
    def done(self) -> bool:
        return self._done

    # -- helpers ----------------------------------------------------------

    def _give(self, agent, intervals):
        for s, e in intervals:
            if e > s:
                self.allocation.append((s, e, agent))

    def _query(self, agent, kind, **kw):
        return Query(agent=agent, kind=kind, procedure=self.procedure,
                     n_agents=self.n_agents, **kw)

    @staticmethod
    def _validate(q: Query, action):
        k = q.kind
        if k in ("cut", "diminish") and action is not None:
            if not isinstance(action, int) or not q.left <= action <= q.right:
                raise ProtocolError(f"{k} must be a boundary in [{q.left}, {q.right}]")
            if k == "diminish" and action >= q.standing:
                raise ProtocolError("diminish must move the boundary strictly left")
        elif k == "diminish":
            pass  # None = pass
        elif k == "cut":
            raise ProtocolError("cut takes a boundary, not a pass")
        elif k == "cut2":
            try:
                c1, c2 = action
            except (TypeError, ValueError):
                raise ProtocolError("cut2 takes a pair of boundaries") from None
            if not (isinstance(c1, int) and isinstance(c2, int) and 0 <= c1 <= c2 <= WIDTH):
                raise ProtocolError("cut2 boundaries must satisfy 0 <= c1 <= c2 <= width")
        elif k in ("choose", "pick"):
            if not isinstance(action, int) or not 0 <= action < len(q.pieces):
                raise ProtocolError(f"{k} takes a piece index 0..{len(q.pieces) - 1}")
        elif k == "trim":
            try:
                b, t = action
            except (TypeError, ValueError):
                raise ProtocolError("trim takes (piece index, boundary)") from None
            if not isinstance(b, int) or not 0 <= b < len(q.pieces):
                raise ProtocolError("trim piece index out of range")
            (s, e), = q.pieces[b]
            if not isinstance(t, int) or not s <= t <= e:
                raise ProtocolError("trim boundary must stay inside the trimmed piece")
        elif k == "split":
            try:
                s1, s2, holes = action
            except (TypeError, ValueError):
                raise ProtocolError("split takes (s1, s2, holes)") from None
            if not (isinstance(s1, int) and isinstance(s2, int)
                    and q.left <= s1 <= s2 <= q.right):
                raise ProtocolError("split boundaries must be ordered inside the trimmings")
            last = s2 - 1
            for h in holes:
                if not isinstance(h, int) or h <= last or h >= q.right:
                    raise ProtocolError("split holes must be increasing pixels right of s2")
                last = h
        else:
            raise ProtocolError(f"unknown query kind {k!r}")

    # -- the six programs --------------------------------------------------

    def _program_acc(self):
        x = yield self._query(0, "cut", group_size=2)
        pieces = (((0, x),), ((x, WIDTH),))
        c = yield self._query(1, "choose", pieces=pieces)
        self._give(1, pieces[c])
        self._give(0, pieces[1 - c])

    def _program_scc(self):
        x0 = yield self._query(0, "cut", group_size=2)
        x1 = yield self._query(1, "cut", group_size=2)
        mid = (x0 + x1) // 2
        lower = 0 if x0 < x1 else 1  # exact tie: agent 1 counts as the lower cutter
        self._give(lower, ((0, mid),))
        self._give(1 - lower, ((mid, WIDTH),))

    def _program_ds(self):
        y, stage = 0, 1
        active = list(range(self.n_agents))
        while len(active) > 1:
            cuts = []
            for a in active:
                x = yield self._query(a, "cut", left=y, stage=stage,
                                      group_size=len(active))
                cuts.append((x, a))
            x_star, exiter = min(cuts)
            self._give(exiter, ((y, x_star),))
            active.remove(exiter)
            y, stage = x_star, stage + 1
        self._give(active[0], ((y, WIDTH),))

    def _program_ld(self):
        y, stage = 0, 1
        active = list(range(self.n_agents))
        while len(active) > 1:
            proposer = active[0]
            x = yield self._query(proposer, "cut", left=y, stage=stage,
                                  group_size=len(active))
            standing, holder = x, proposer
            for a in active[1:]:
                d = yield self._query(a, "diminish", left=y, stage=stage,
                                      group_size=len(active), standing=standing)
                if d is not None:
                    standing, holder = d, a
            self._give(holder, ((y, standing),))
            active.remove(holder)
            y, stage = standing, stage + 1
        self._give(active[0], ((y, WIDTH),))

    def _program_ep(self):
        yield from self._ep_node(0, WIDTH, list(range(self.n_agents)), 1)

    def _ep_node(self, y, z, group, stage):
        if len(group) == 1:
            self._give(group[0], ((y, z),))
            return
        cuts = []
        for a in group:
            x = yield self._query(a, "cut", left=y, right=z, stage=stage,
                                  group_size=len(group))
            cuts.append((x, a))
        cuts.sort()
        m = len(group) // 2
        x_star = cuts[m - 1][0]
        left_group = sorted(a for _, a in cuts[:m])
        right_group = sorted(a for _, a in cuts[m:])
        yield from self._ep_node(y, x_star, left_group, stage + 1)
        yield from self._ep_node(x_star, z, right_group, stage + 1)

    def _program_sc(self):
        c1, c2 = yield self._query(0, "cut2", group_size=3)
        bounds = [(0, c1), (c1, c2), (c2, WIDTH)]
        b, t = yield self._query(1, "trim",
                                 pieces=tuple((p,) for p in bounds))
        trim_left = bounds[b][0]
        mains = list(bounds)
        mains[b] = (t, bounds[b][1])

        first = yield self._query(2, "pick", trimmed_index=b,
                                  pieces=tuple((p,) for p in mains))
        taken = {2: first}
        if first == b:
            tp_holder = 2
            rest = [ix for ix in range(3) if ix != first]
            second = yield self._query(1, "pick",
                                       pieces=tuple((mains[ix],) for ix in rest))
            taken[1] = rest[second]
        else:
            tp_holder = 1
            taken[1] = b  # handed the trimmed piece without a choice
        taken[0] = next(ix for ix in range(3) if ix not in taken.values())
        for agent, ix in taken.items():
            self._give(agent, (mains[ix],))

        splitter = 3 - tp_holder  # the opponent who did not end up with it
        if t <= trim_left:
            return  # nothing was trimmed off
        s1, s2, holes = yield self._query(splitter, "split",
                                          left=trim_left, right=t)
        t_pieces = (
            ((trim_left, s1),) if s1 > trim_left else (),
            ((s1, s2),) if s2 > s1 else (),
            tuple(_subtract_holes(s2, t, holes)),
        )
        pick_i = yield self._query(tp_holder, "pick", pieces=t_pieces)
        left_over = [ix for ix in range(3) if ix != pick_i]
        pick_0 = yield self._query(0, "pick",
                                   pieces=tuple(t_pieces[ix] for ix in left_over))
        self._give(tp_holder, t_pieces[pick_i])
        self._give(0, t_pieces[left_over[pick_0]])
        del left_over[pick_0]
        self._give(splitter, t_pieces[left_over[0]])


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------

def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def _best_index(v: Valuation, pieces) -> int:
    """Highest-value candidate; equal values go to the earliest (leftmost)."""
    values = [piece_value(v, share) for share in pieces]
    best = max(values)
    return values.index(best)


def truthful_policy(v: Valuation):
    """The honest automaton: plays exactly by its own valuation."""

    def claim(q: Query) -> int:
        total = v.total
        if q.kind == "diminish" or q.procedure.endswith(("ds", "ld")):
            return _ceil_div(total, q.n_agents)
        if q.procedure.endswith("ep"):
            return _ceil_div((q.group_size // 2) * total, q.n_agents)
        return _ceil_div(total, 2)  # both cut-and-choose variants

    def policy(q: Query):
        if q.kind == "cut":
            return min(cut_point(v, q.left, claim(q)), q.right)
        if q.kind == "diminish":
            x = cut_point(v, q.left, claim(q))
            return x if x < q.standing else None
        if q.kind in ("choose", "pick"):
            return _best_index(v, q.pieces)
        if q.kind == "cut2":
            return (cut_point(v, 0, _ceil_div(v.total, 3)),
                    cut_point(v, 0, _ceil_div(2 * v.total, 3)))
        if q.kind == "trim":
            values = [piece_value(v, share) for share in q.pieces]
            b = values.index(max(values))
            second = max(values[ix] for ix in range(3) if ix != b)
            (start, _), = q.pieces[b]
            return (b, cut_point(v, start, values[b] - second))
        if q.kind == "split":
            return _split_trimmings(v, q.left, q.right)
        raise ProtocolError(f"unknown query kind {q.kind!r}")

    return policy


def _split_trimmings(v: Valuation, t0: int, t1: int):
    """Divide [t0, t1) into three parts of equal own value.

    The first two boundaries claim floor(value/3) each; whatever surplus the
    last stretch then carries beyond that quota is carved out of it pixel by
    pixel from the right. The carved pixels are never allocated, which is
    what makes the division exactly even (and the whole procedure exactly
    envy-free) on unit-weight valuations, at a cost of at most two points
    of trimmings in the splitter's own measure.
    """
    q = v.value(t0, t1) // 3
    s1 = min(cut_point(v, t0, q), t1)
    s2 = min(cut_point(v, s1, q), t1)
    holes = []
    surplus = v.value(s2, t1) - q
    pos = t1 - 1
    while surplus > 0 and pos >= s2:
        w = int(v.weights[pos])
        if w > 0:
            holes.append(pos)
            surplus -= w
        pos -= 1
    return (s1, s2, tuple(sorted(holes)))


def scripted_policy(fallback, script, kinds=("cut", "cut2", "diminish")):
    """Answer queries of the given kinds from a list, truthfully otherwise.

    `script` values are consumed in query order; once exhausted, the
    fallback policy answers everything.
    """
    queue = list(script)

    def policy(q: Query):
        if q.kind in kinds and queue:
            return queue.pop(0)
        return fallback(q)

    return policy


# ---------------------------------------------------------------------------
# Running and replaying
# ---------------------------------------------------------------------------

def run(procedure: str, profile, policies=None, subject_role: int = 0):
    """Drive one full run; returns (allocation, trace).

    `policies` maps each agent to a callable Query -> action; omitted agents
    (or a None entry) play truthfully from their profile valuation.
    """
    problems = validate_profile(profile)
    if problems:
        raise ValueError("; ".join(problems))
    n = agents_for(procedure)
    if len(profile) != n:
        raise ValueError(f"{procedure} needs {n} agents, profile has {len(profile)}")
    table = [truthful_policy(v) for v in profile]
    if policies:
        for agent, pol in (policies.items() if isinstance(policies, dict)
                           else enumerate(policies)):
            if pol is not None:
                table[agent] = pol
    machine = Machine(procedure, n)
    query = machine.start()
    while query is not None:
        query = machine.step(table[query.agent](query))
    trace = RoundTrace(procedure, n, subject_role,
                       list(machine.actions), list(machine.allocation))
    return machine.allocation, trace


def run_3sc(cuts, profile, policies=None):
    """Run the trimming procedure with agent 0's two cuts fixed in advance."""
    c1, c2 = cuts
    base = truthful_policy(profile[0])
    table = dict(policies) if isinstance(policies, dict) else \
        {i: p for i, p in enumerate(policies)} if policies else {}
    table[0] = scripted_policy(base, [(c1, c2)], kinds=("cut2",))
    return run("3sc", profile, table)


def replay(trace: RoundTrace):
    """Re-feed a trace's actions; returns the reproduced allocation."""
    machine = Machine(trace.procedure, trace.n_agents)
    query = machine.start()
    for agent, kind, value in trace.actions:
        if query is None or query.agent != agent or query.kind != kind:
            raise ProtocolError("trace does not match the procedure's query order")
        query = machine.step(value)
    if query is not None:
        raise ProtocolError("trace ended before the procedure finished")
    return machine.allocation
