"""Session replica of the lab protocol, trace persistence, and metrics.

A session walks one subject (always seat 0) through the eight procedures in
the published order, seven rounds each, against truthful automata.  Rounds
persist as JSONL lines; the metrics aggregator only ever reads those lines,
so reports are reproducible from disk.
"""

from __future__ import annotations

import json
import time
import uuid
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .cake import WIDTH, audit, validate_profile
from .procedures import (
    Machine,
    agents_for,
    scripted_policy,
    split_procedure,
    truthful_policy,
)
from .profiles import lab_profile
from . import strategy

PROCEDURE_ORDER = ("2acc", "2scc", "3ds", "4ds", "3ld", "4ld", "4ep", "3sc")
ROUNDS = 7
REVEAL_ROUND = 6
TIME_LIMIT_S = 420.0
BASE_PAYMENT_POUNDS = 5.0

ENVY_TOLERANCES = (0, 5, 10)
PAYOFF_TOLERANCES = (5, 10, 15)
PIXEL_TOLERANCE = 5


def desired_intervals(v):
    """Constant-weight runs [start, end, weight] with positive weight."""
    out, start, current = [], None, 0
    weights = v.weights
    for i in range(WIDTH + 1):
        w = int(weights[i]) if i < WIDTH else 0
        if start is not None and w != current:
            out.append([start, i, current])
            start = None
        if start is None and w > 0:
            start, current = i, w
    return out


@dataclass(frozen=True)
class SessionConfig:
    procedures: tuple = PROCEDURE_ORDER
    rounds: int = ROUNDS
    reveal_round: int = REVEAL_ROUND
    time_limit_s: float = TIME_LIMIT_S
    enforce_time: bool = False
    profiles: Optional[dict] = None  # procedure id -> tuple of Valuations
    seed: int = 0
    subject: str = "subject"
    session_id: Optional[str] = None

    def __post_init__(self):
        if not self.procedures:
            raise ValueError("need at least one procedure")
        for procedure in self.procedures:
            split_procedure(procedure)
        if not 1 <= self.reveal_round <= self.rounds:
            raise ValueError("reveal round must fall within the round count")

    def profile_for(self, procedure):
        if self.profiles and procedure in self.profiles:
            return tuple(self.profiles[procedure])
        return lab_profile(procedure)


@dataclass(frozen=True)
class NextQuery:
    procedure: str
    round: int
    query: object


@dataclass(frozen=True)
class RoundResult:
    trace: dict

    @property
    def points(self):
        return self.trace["points"][0]


@dataclass(frozen=True)
class ProcedureDone:
    procedure: str
    results: tuple  # one RoundResult normally; several after a timeout


@dataclass(frozen=True)
class SessionDone:
    procedure: str
    results: tuple


class Session:
    """Single-subject walk through the configured procedures.

    The subject answers only their own queries; automata answers are filled
    in immediately and recorded in the same trace.  `clock` is any zero-arg
    callable returning seconds — injectable so simulations and tests are
    deterministic.
    """

    def __init__(self, config: SessionConfig, clock: Callable[[], float] = time.monotonic,
                 trace_sink: Optional[Callable[[dict], None]] = None):
        self.config = config
        self.id = config.session_id or uuid.uuid4().hex[:12]
        self.clock = clock
        self.trace_sink = trace_sink
        self.rng = np.random.default_rng(config.seed)
        self.traces = []
        self.questionnaire = None
        self._proc_index = 0
        self._round = 1
        self._elapsed_s = 0.0  # active time spent in the current procedure
        for procedure in config.procedures:
            profile = config.profile_for(procedure)
            problems = validate_profile(profile)
            if len(profile) != agents_for(procedure):
                problems.append(f"expected {agents_for(procedure)} agents, got {len(profile)}")
            if problems:
                raise ValueError(f"{procedure}: {'; '.join(problems)}")
        self._begin_round()

    # -- position ----------------------------------------------------------

    @property
    def done(self):
        return self._proc_index >= len(self.config.procedures)

    @property
    def procedure(self):
        if self.done:
            return None
        return self.config.procedures[self._proc_index]

    @property
    def round(self):
        return None if self.done else self._round

    @property
    def revealed(self):
        return (not self.done) and self._round >= self.config.reveal_round

    @property
    def profile(self):
        return self.config.profile_for(self.procedure)

    def pending(self):
        return None if self.done else NextQuery(self.procedure, self._round, self._query)

    def remaining_time_s(self):
        if self.done or not self.config.enforce_time:
            return None
        spent = self._elapsed_s + (self.clock() - self._round_start)
        return max(self.config.time_limit_s - spent, 0.0)

    def own_intervals(self):
        index = min(self._proc_index, len(self.config.procedures) - 1)
        procedure = self.config.procedures[index]
        return desired_intervals(self.config.profile_for(procedure)[0])

    def opponent_intervals(self):
        """Automata desired intervals — only once the reveal round starts."""
        if not self.revealed:
            raise PermissionError("opponent valuations are hidden before the reveal round")
        return [desired_intervals(v) for v in self.profile[1:]]

    # -- round machinery ----------------------------------------------------

    def _begin_round(self):
        self._machine = Machine(self.procedure, len(self.profile))
        self._automata = [truthful_policy(v) for v in self.profile]
        self._actions = []
        self._round_start = self.clock()
        self._query = self._machine.start()
        self._drain()

    def _record(self, query, value):
        self._actions.append({
            "actor": query.agent,
            "query_kind": query.kind,
            "value": value,
            "t_ms": int((self.clock() - self._round_start) * 1000),
        })

    def _drain(self):
        """Answer automata queries until the subject is up or the round ends."""
        while self._query is not None and self._query.agent != 0:
            value = self._automata[self._query.agent](self._query)
            self._record(self._query, value)
            self._query = self._machine.step(value)

    def _round_trace(self, allocation, points, view):
        return {
            "session": self.id,
            "subject": self.config.subject,
            "procedure": self.procedure,
            "round": self._round,
            "revealed": self.revealed,
            "actions": list(self._actions),
            "allocation": [list(piece) for piece in allocation],
            "points": list(points),
            "subject_view_of_pieces": list(view),
        }

    def _store(self, trace):
        self.traces.append(trace)
        if self.trace_sink is not None:
            self.trace_sink(trace)

    def _finish_round(self):
        profile = self.profile
        report = audit(profile, self._machine.allocation)
        shares = [[] for _ in profile]
        for start, end, agent in self._machine.allocation:
            shares[agent].append((start, end))
        subject = profile[0]
        view = [sum(subject.value(a, b) for a, b in pieces) for pieces in shares]
        trace = self._round_trace(self._machine.allocation, report.points, view)
        self._store(trace)
        self._elapsed_s += self.clock() - self._round_start
        return trace

    def _advance_after(self, trace):
        """Move past a finished round and wrap it in the right marker."""
        ended = self.procedure
        if self._round < self.config.rounds:
            self._round += 1
            self._begin_round()
            return RoundResult(trace)
        self._proc_index += 1
        self._round = 1
        self._elapsed_s = 0.0
        if self.done:
            return SessionDone(ended, (RoundResult(trace),))
        self._begin_round()
        return ProcedureDone(ended, (RoundResult(trace),))

    def _timeout(self):
        """Score the unfinished and remaining rounds of this procedure zero."""
        ended = self.procedure
        n = len(self.profile)
        traces = []
        while True:
            traces.append(self._round_trace((), [0] * n, [0] * n))
            self._store(traces[-1])
            self._actions = []  # later zero rounds saw no actions
            if self._round >= self.config.rounds:
                break
            self._round += 1
        results = tuple(RoundResult(t) for t in traces)
        self._proc_index += 1
        self._round = 1
        self._elapsed_s = 0.0
        if self.done:
            return SessionDone(ended, results)
        self._begin_round()
        return ProcedureDone(ended, results)


def new_session(config: SessionConfig, clock=time.monotonic, trace_sink=None) -> Session:
    return Session(config, clock=clock, trace_sink=trace_sink)


def submit(session: Session, action):
    """Feed the subject's answer to the pending query and advance.

    Returns the next thing the subject needs to see: their next query, the
    finished round's result, or the procedure/session completion marker.
    Invalid answers raise ValueError (the round stays where it was); with
    time enforcement on, a submission after the budget zeroes the rest of
    the procedure.
    """
    if session.done:
        raise ValueError("session already complete")
    if session.config.enforce_time and session.remaining_time_s() <= 0:
        return session._timeout()
    query = session._query
    session._record(query, action)  # optimistic; popped again on rejection
    try:
        session._query = session._machine.step(action)
    except ValueError:
        session._actions.pop()
        raise
    session._drain()
    if session._query is not None:
        return session.pending()
    return session._advance_after(session._finish_round())


def submit_questionnaire(session: Session, blob):
    """Store the optional free-text/ratings blob verbatim."""
    session.questionnaire = blob
    if session.trace_sink is not None:
        session.trace_sink({"session": session.id, "questionnaire": blob})


def payment_breakdown(session: Session, rng=None) -> dict:
    """Base, bonus, total, and which two rounds were drawn for the bonus.

    The two paid rounds are drawn uniformly without replacement from all
    rounds played, regardless of procedure.
    """
    if not session.done:
        raise ValueError("payment is only defined for a completed session")
    rng = session.rng if rng is None else rng
    drawn = sorted(int(i) for i in
                   rng.choice(len(session.traces), size=2, replace=False))
    rounds = [{
        "procedure": session.traces[i]["procedure"],
        "round": session.traces[i]["round"],
        "points": session.traces[i]["points"][0],
    } for i in drawn]
    bonus = sum(r["points"] for r in rounds) / 10.0
    return {
        "base_pounds": BASE_PAYMENT_POUNDS,
        "bonus_pounds": bonus,
        "total_pounds": BASE_PAYMENT_POUNDS + bonus,
        "drawn_rounds": rounds,
    }


def payment(session: Session, rng=None) -> float:
    """£5 plus a tenth of the points of two distinct random rounds."""
    return payment_breakdown(session, rng)["total_pounds"]


# ---------------------------------------------------------------------------
# Trace persistence
# ---------------------------------------------------------------------------

def config_to_json(config: SessionConfig) -> dict:
    """JSON-safe dict from which `config_from_json` rebuilds the config."""
    profiles = None
    if config.profiles is not None:
        profiles = {
            procedure: [[int(w) for w in v.weights] for v in profile]
            for procedure, profile in config.profiles.items()
        }
    return {
        "procedures": list(config.procedures),
        "rounds": config.rounds,
        "reveal_round": config.reveal_round,
        "time_limit_s": config.time_limit_s,
        "enforce_time": config.enforce_time,
        "profiles": profiles,
        "seed": config.seed,
        "subject": config.subject,
        "session_id": config.session_id,
    }


def config_from_json(data: dict) -> SessionConfig:
    from .cake import Valuation

    profiles = data.get("profiles")
    if profiles is not None:
        profiles = {
            procedure: tuple(Valuation(row) for row in rows)
            for procedure, rows in profiles.items()
        }
    return SessionConfig(
        procedures=tuple(data["procedures"]),
        rounds=data["rounds"],
        reveal_round=data["reveal_round"],
        time_limit_s=data["time_limit_s"],
        enforce_time=data["enforce_time"],
        profiles=profiles,
        seed=data["seed"],
        subject=data["subject"],
        session_id=data["session_id"],
    )


def restore_session(config: SessionConfig, traces, clock=time.monotonic,
                    trace_sink=None, questionnaire=None) -> Session:
    """Rebuild a session from its persisted round traces.

    Between rounds a session has no hidden state beyond its position and the
    active-time budget, both of which the traces determine, so restoring is
    direct state injection rather than replay.  A round that was in progress
    when the process died restarts from its first query.
    """
    limit = len(config.procedures) * config.rounds
    if len(traces) > limit:
        raise ValueError(f"{len(traces)} traces for a {limit}-round session")
    session = Session(config, clock=clock, trace_sink=trace_sink)
    session.traces = list(traces)
    session.questionnaire = questionnaire
    session._proc_index = len(traces) // config.rounds
    session._round = len(traces) % config.rounds + 1
    current = traces[session._proc_index * config.rounds:]
    session._elapsed_s = sum(
        max((a["t_ms"] for a in t["actions"]), default=0) for t in current
    ) / 1000.0
    if not session.done:
        session._begin_round()
    return session


def write_traces(path, traces):
    with open(path, "a", encoding="utf8") as fh:
        for trace in traces:
            fh.write(json.dumps(trace) + "\n")


def read_traces(path):
    """Round-trace lines from a JSONL file (other line kinds skipped)."""
    out = []
    with open(path, encoding="utf8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                record = json.loads(line)
                if "actions" in record:
                    out.append(record)
    return out


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

_baseline_cache: dict = {}


def truthful_baseline(procedure, profile):
    """(points per agent, subject's opening action value) under all-truthful play."""
    key = (procedure, tuple(profile))
    hit = _baseline_cache.get(key)
    if hit is not None:
        return hit
    machine = Machine(procedure, len(profile))
    automata = [truthful_policy(v) for v in profile]
    query = machine.start()
    opening = None
    while query is not None:
        value = automata[query.agent](query)
        if opening is None and query.agent == 0:
            opening = value
        query = machine.step(value)
    points = audit(profile, machine.allocation).points
    _baseline_cache[key] = (points, opening)
    return points, opening


def _coords(value):
    if isinstance(value, (list, tuple)):
        return [int(x) for x in value]
    return [int(value)]


def _cut_is_truthful(action_value, truthful_value, pixel_tolerance):
    got, want = _coords(action_value), _coords(truthful_value)
    return len(got) == len(want) and all(
        abs(a - b) <= pixel_tolerance for a, b in zip(got, want)
    )


def _first_subject_action(trace):
    for action in trace["actions"]:
        if action["actor"] == 0:
            return action
    return None


@dataclass(frozen=True)
class MetricsReport:
    rows: tuple

    def value(self, procedure, round_no, metric, tolerance=None):
        for row in self.rows:
            if (row["procedure"], row["round"], row["metric"], row["tolerance"]) == (
                    procedure, round_no, metric, tolerance):
                return row["value"]
        raise KeyError((procedure, round_no, metric, tolerance))

    def to_csv(self):
        lines = ["procedure,round,metric,tolerance,value"]
        for row in self.rows:
            tolerance = "" if row["tolerance"] is None else row["tolerance"]
            lines.append(
                f"{row['procedure']},{row['round']},{row['metric']},"
                f"{tolerance},{row['value']}"
            )
        return "\n".join(lines) + "\n"


def metrics(traces, envy_tolerances=ENVY_TOLERANCES,
            payoff_tolerances=PAYOFF_TOLERANCES,
            pixel_tolerance=PIXEL_TOLERANCE, profiles=None) -> MetricsReport:
    """Per procedure-and-round rates recomputed purely from trace lines.

    Envy re-audits the stored allocation against the full profile; the
    truthfulness calls compare the subject to the truthful automaton's
    baseline on the same profile.  A manipulation (opening action off the
    truthful one by more than the pixel tolerance) is successful when it
    out-earned the baseline.
    """
    profiles = profiles or {}
    cells = {}
    for trace in traces:
        cells.setdefault((trace["procedure"], trace["round"]), []).append(trace)

    rows = []
    for (procedure, round_no), cell in sorted(cells.items()):
        profile = tuple(profiles.get(procedure) or lab_profile(procedure))
        base_points, base_opening = truthful_baseline(procedure, profile)
        allocations = [
            [tuple(piece) for piece in trace["allocation"]] for trace in cell
        ]

        def add(metric, tolerance, value):
            rows.append({
                "procedure": procedure,
                "round": round_no,
                "metric": metric,
                "tolerance": tolerance,
                "value": value,
            })

        for tolerance in envy_tolerances:
            envies = [
                any(audit(profile, allocation, tolerance=tolerance).envious)
                for allocation in allocations
            ]
            add("envy_rate", tolerance, sum(envies) / len(cell))

        for tolerance in payoff_tolerances:
            truthful = [
                abs(trace["points"][0] - base_points[0]) <= tolerance
                for trace in cell
            ]
            add("truthful_by_payoff_rate", tolerance, sum(truthful) / len(cell))

        by_cut = []
        successful = unsuccessful = 0
        for trace in cell:
            action = _first_subject_action(trace)
            truthful_cut = action is not None and _cut_is_truthful(
                action["value"], base_opening, pixel_tolerance)
            by_cut.append(truthful_cut)
            if not truthful_cut:
                if trace["points"][0] > base_points[0]:
                    successful += 1
                else:
                    unsuccessful += 1
        add("truthful_by_cut_rate", pixel_tolerance, sum(by_cut) / len(cell))
        add("successful_manipulation_rate", pixel_tolerance, successful / len(cell))
        add("unsuccessful_manipulation_rate", pixel_tolerance, unsuccessful / len(cell))
        add("mean_points", None, sum(t["points"][0] for t in cell) / len(cell))
        add("mean_time_ms", None,
            sum(max((a["t_ms"] for a in t["actions"]), default=0) for t in cell)
            / len(cell))
    return MetricsReport(rows=tuple(rows))


# ---------------------------------------------------------------------------
# Batch simulation
# ---------------------------------------------------------------------------

def _counter_clock(step_s=0.25):
    count = 0

    def clock():
        nonlocal count
        count += 1
        return count * step_s

    return clock


@dataclass(frozen=True)
class BatchConfig:
    """Population mix: fraction `alpha` plays truthfully; everyone else
    draws a policy kind from `policies` ("best_response" or
    "envious_best_response", the latter falling back to the former outside
    the trimming procedure)."""

    alpha: float = 1.0
    policies: tuple = ("best_response",)
    repetitions: int = 1
    seed: int = 0
    procedures: tuple = PROCEDURE_ORDER
    rounds: int = ROUNDS
    reveal_round: int = REVEAL_ROUND
    profiles: Optional[dict] = None

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha is a population fraction in [0, 1]")
        if self.repetitions < 1:
            raise ValueError("need at least one repetition")
        bad = set(self.policies) - {"best_response", "envious_best_response"}
        if bad:
            raise ValueError(f"unknown policy kinds: {sorted(bad)}")


def _deviation_actions(kind, procedure, profile):
    if kind == "envious_best_response" and procedure.endswith("sc"):
        found = strategy.envious_best_response(procedure, profile)
        if found is not None:
            return found.actions
    return strategy.best_response(procedure, profile).actions


def simulate_batch(batch: BatchConfig):
    """(traces, MetricsReport) for a population of simulated subjects."""
    rng = np.random.default_rng(batch.seed)
    action_cache = {}
    traces = []
    for rep in range(batch.repetitions):
        truthful = bool(rng.random() < batch.alpha)
        kind = "truthful" if truthful else \
            batch.policies[int(rng.integers(len(batch.policies)))]
        config = SessionConfig(
            procedures=batch.procedures,
            rounds=batch.rounds,
            reveal_round=batch.reveal_round,
            profiles=batch.profiles,
            seed=batch.seed + rep,
            subject=f"sim-{rep:03d}-{kind}",
            session_id=f"batch{batch.seed}-{rep:03d}",
        )
        session = Session(config, clock=_counter_clock())
        while not session.done:
            profile = session.profile
            if truthful:
                actions = ()
            else:
                cache_key = (kind, session.procedure, tuple(profile))
                if cache_key not in action_cache:
                    action_cache[cache_key] = _deviation_actions(
                        kind, session.procedure, profile)
                actions = action_cache[cache_key]
            policy = scripted_policy(truthful_policy(profile[0]), list(actions))
            outcome = session.pending()
            while isinstance(outcome, NextQuery):
                outcome = submit(session, policy(outcome.query))
        traces.extend(session.traces)
    return traces, metrics(traces, profiles=batch.profiles)
