"""HTTP session service: the JSON wire protocol a browser client consumes.

Five endpoints cover the whole surface: create a session, read its state,
submit the subject's next action, settle payment, and list the built-in
profile fixtures.  Sessions persist as a config sidecar plus an append-only
JSONL trace file, so a restarted process recovers every session from disk.

The view built here is the only thing a client ever sees; it carries the
subject's own valuation and public moves, and withholds every automaton
valuation until a round's reveal flag is set.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import threading
import uuid
from typing import Any, Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .experiment import (
    NextQuery,
    ProcedureDone,
    RoundResult,
    Session,
    SessionConfig,
    SessionDone,
    config_from_json,
    config_to_json,
    desired_intervals,
    payment_breakdown,
    read_traces,
    restore_session,
    submit,
    submit_questionnaire,
)
from .instructions import display_name, instruction_text, query_prompt
from .profiles import PROCEDURES, lab_profile


# ---------------------------------------------------------------------------
# Views
# ---------------------------------------------------------------------------

def _public_query(query) -> dict:
    data = dataclasses.asdict(query)
    data["pieces"] = [[list(seg) for seg in piece] for piece in query.pieces]
    data["prompt"] = query_prompt(query.kind)
    return data


def _public_trace(trace: dict) -> dict:
    """One finished round as the subject may see it.

    Opponent scores are measured by the opponents' own valuations, so they
    stay hidden until the round was a revealed one; everything else in a
    trace is an observable move or the subject's own measurement.
    """
    return {
        "procedure": trace["procedure"],
        "round": trace["round"],
        "revealed": trace["revealed"],
        "own_points": trace["points"][0],
        "all_points": list(trace["points"]) if trace["revealed"] else None,
        "allocation": [list(p) for p in trace["allocation"]],
        "subject_view_of_pieces": list(trace["subject_view_of_pieces"]),
        "actions": [dict(a) for a in trace["actions"]],
    }


def session_view(session: Session) -> dict:
    pending = session.pending()
    procedure = session.procedure
    view = {
        "session": session.id,
        "subject": session.config.subject,
        "done": session.done,
        "procedure": procedure,
        "display_name": display_name(procedure) if procedure else None,
        "instructions": instruction_text(procedure) if procedure else None,
        "round": session.round,
        "rounds": session.config.rounds,
        "reveal_round": session.config.reveal_round,
        "revealed": session.revealed,
        "pending": _public_query(pending.query) if pending else None,
        "own_intervals": session.own_intervals(),
        "opponent_intervals":
            session.opponent_intervals() if session.revealed else None,
        "history": [_public_trace(t) for t in session.traces],
        "remaining_time_s": session.remaining_time_s(),
        "payment_available": session.done,
    }
    return view


# ---------------------------------------------------------------------------
# Persistence-backed store
# ---------------------------------------------------------------------------

class SessionStore:
    """Live sessions plus their on-disk config/trace/payment records."""

    def __init__(self, trace_dir: str, enforce_time_default: bool = False):
        self.trace_dir = trace_dir
        self.enforce_time_default = enforce_time_default
        os.makedirs(trace_dir, exist_ok=True)
        self._live: dict[str, Session] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._replies: dict[str, dict[str, dict]] = {}  # idempotency cache
        self._registry_lock = threading.Lock()

    # -- paths ---------------------------------------------------------------

    def _config_path(self, session_id):
        return os.path.join(self.trace_dir, f"{session_id}.json")

    def _trace_path(self, session_id):
        return os.path.join(self.trace_dir, f"{session_id}.jsonl")

    def _payment_path(self, session_id):
        return os.path.join(self.trace_dir, f"{session_id}.payment.json")

    def _sink(self, session_id):
        path = self._trace_path(session_id)

        def append(line):
            with open(path, "a", encoding="utf8") as fh:
                fh.write(json.dumps(line) + "\n")

        return append

    # -- lifecycle -------------------------------------------------------------

    def lock_for(self, session_id) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(session_id, threading.Lock())

    def create(self, config: SessionConfig) -> Session:
        if config.session_id is None:
            config = dataclasses.replace(config, session_id=uuid.uuid4().hex[:12])
        session = Session(config, trace_sink=self._sink(config.session_id))
        with open(self._config_path(session.id), "w", encoding="utf8") as fh:
            json.dump(config_to_json(config), fh)
        with self._registry_lock:
            self._live[session.id] = session
            self._replies[session.id] = {}
        return session

    def get(self, session_id: str) -> Session:
        with self._registry_lock:
            hit = self._live.get(session_id)
        if hit is not None:
            return hit
        return self._recover(session_id)

    def _recover(self, session_id: str) -> Session:
        config_path = self._config_path(session_id)
        if not os.path.exists(config_path):
            raise KeyError(session_id)
        with open(config_path, encoding="utf8") as fh:
            config = config_from_json(json.load(fh))
        trace_path = self._trace_path(session_id)
        traces, questionnaire = [], None
        if os.path.exists(trace_path):
            traces = read_traces(trace_path)
            with open(trace_path, encoding="utf8") as fh:
                for line in fh:
                    record = json.loads(line) if line.strip() else {}
                    if "questionnaire" in record:
                        questionnaire = record["questionnaire"]
        session = restore_session(config, traces,
                                  trace_sink=self._sink(session_id),
                                  questionnaire=questionnaire)
        with self._registry_lock:
            self._live[session_id] = session
            self._replies.setdefault(session_id, {})
        return session

    # -- idempotent action replies ---------------------------------------------

    def cached_reply(self, session_id, action_id) -> Optional[dict]:
        if action_id is None:
            return None
        return self._replies.get(session_id, {}).get(action_id)

    def remember_reply(self, session_id, action_id, reply: dict):
        if action_id is not None:
            self._replies.setdefault(session_id, {})[action_id] = reply

    # -- payment ---------------------------------------------------------------

    def settle_payment(self, session: Session) -> dict:
        path = self._payment_path(session.id)
        if os.path.exists(path):
            with open(path, encoding="utf8") as fh:
                return json.load(fh)
        digest = hashlib.sha256(session.id.encode("utf8")).digest()
        rng = np.random.default_rng(
            [session.config.seed, int.from_bytes(digest[:8], "big")])
        breakdown = payment_breakdown(session, rng)
        with open(path, "w", encoding="utf8") as fh:
            json.dump(breakdown, fh)
        return breakdown


# ---------------------------------------------------------------------------
# Request bodies
# ---------------------------------------------------------------------------

class CreateSessionBody(BaseModel):
    subject: str = "subject"
    procedures: Optional[list[str]] = None
    rounds: Optional[int] = None
    reveal_round: Optional[int] = None
    seed: int = 0
    enforce_time: Optional[bool] = None
    time_limit_s: Optional[float] = None
    profiles: Optional[dict[str, list[list[int]]]] = None


class ActionBody(BaseModel):
    value: Any = Field(default=None)
    action_id: Optional[str] = None
    questionnaire: Any = Field(default=None)


# ---------------------------------------------------------------------------
# The app
# ---------------------------------------------------------------------------

def create_app(trace_dir: str, enforce_time_default: bool = False) -> FastAPI:
    app = FastAPI(title="fairslice session service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    store = SessionStore(trace_dir, enforce_time_default)
    app.state.store = store

    def fetch(session_id) -> Session:
        try:
            return store.get(session_id)
        except KeyError:
            raise HTTPException(404, detail={"message": f"no session {session_id}"})

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        defaults = SessionConfig()
        raw = {
            "procedures": list(defaults.procedures),
            "rounds": defaults.rounds,
            "reveal_round": defaults.reveal_round,
            "time_limit_s": defaults.time_limit_s,
            "enforce_time": store.enforce_time_default,
            "profiles": body.profiles,
            "seed": body.seed,
            "subject": body.subject,
            "session_id": None,
        }
        if body.procedures is not None:
            raw["procedures"] = body.procedures
        if body.rounds is not None:
            raw["rounds"] = body.rounds
        if body.reveal_round is not None:
            raw["reveal_round"] = body.reveal_round
        if body.enforce_time is not None:
            raw["enforce_time"] = body.enforce_time
        if body.time_limit_s is not None:
            raw["time_limit_s"] = body.time_limit_s
        try:
            config = config_from_json(raw)
            session = store.create(config)
        except ValueError as err:
            raise HTTPException(400, detail={"message": str(err)})
        return session_view(session)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        session = fetch(session_id)
        with store.lock_for(session_id):
            return session_view(session)

    @app.post("/sessions/{session_id}/actions")
    def post_action(session_id: str, body: ActionBody):
        session = fetch(session_id)
        with store.lock_for(session_id):
            cached = store.cached_reply(session_id, body.action_id)
            if cached is not None:
                return cached
            if body.questionnaire is not None:
                submit_questionnaire(session, body.questionnaire)
                reply = {"outcome": "questionnaire_stored",
                         "view": session_view(session)}
                store.remember_reply(session_id, body.action_id, reply)
                return reply
            value = body.value
            if isinstance(value, list):
                value = tuple(
                    tuple(v) if isinstance(v, list) else v for v in value)
            try:
                outcome = submit(session, value)
            except ValueError as err:
                status = 409 if session.done else 400
                raise HTTPException(status, detail={"message": str(err)})
            reply = {"view": session_view(session)}
            if isinstance(outcome, NextQuery):
                reply["outcome"] = "next_query"
            elif isinstance(outcome, RoundResult):
                reply["outcome"] = "round_result"
                reply["result"] = _public_trace(outcome.trace)
            else:
                reply["outcome"] = ("session_done"
                                    if isinstance(outcome, SessionDone)
                                    else "procedure_done")
                reply["procedure"] = outcome.procedure
                reply["results"] = [_public_trace(r.trace)
                                    for r in outcome.results]
            store.remember_reply(session_id, body.action_id, reply)
            return reply

    @app.get("/sessions/{session_id}/payment")
    def get_payment(session_id: str):
        session = fetch(session_id)
        with store.lock_for(session_id):
            try:
                breakdown = store.settle_payment(session)
            except ValueError as err:
                raise HTTPException(409, detail={"message": str(err)})
        return {"session": session_id, **breakdown}

    @app.get("/fixtures/profiles")
    def get_fixtures():
        out = {}
        for procedure in PROCEDURES:
            profile = lab_profile(procedure)
            subject = profile[0]
            out[procedure] = {
                "display_name": display_name(procedure),
                "instructions": instruction_text(procedure),
                "agents": len(profile),
                "subject_intervals": desired_intervals(subject),
                "subject_weights": [int(w) for w in subject.weights],
                "opponents": "hidden until a live session's reveal round",
            }
        return {"procedures": list(PROCEDURES), "profiles": out}

    return app


def serve(port: int = 8000, trace_dir: str = "sessions",
          enforce_time_default: bool = True, host: str = "127.0.0.1"):
    """Run the service; human sessions get the time limit by default."""
    import uvicorn

    app = create_app(trace_dir, enforce_time_default=enforce_time_default)
    uvicorn.run(app, host=host, port=port)
