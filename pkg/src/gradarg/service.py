"""Stateful interactive sessions over HTTP.

A session is an event-sourced view over a corpus framework: participants post
edit events (activations, base-score changes, new arguments, preference
changes) and request decisions; ties under the interactive strategy surface as
prompts that subsequent events feed. Sessions persist as JSON-lines journals
and are rebuilt by replay on startup, which also makes decision histories
reproducible.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from . import corpus as corpus_mod
from .afformat import SourceDocument, serialize_framework, try_parse_framework
from .analysis import (
    ExactShapley,
    PermutationSampling,
    Scenario,
    base_score_sweep,
    relation_attribution,
    sweep_to_csv,
)
from .dynamics import (
    AddArgument,
    EditEvent,
    RemoveArgument,
    SetActive,
    SetBaseScore,
    SetPreference,
    apply_edit,
    event_from_dict,
    event_to_dict,
)
from .errors import (
    ForbiddenError,
    GradargError,
    InvalidAfError,
    OutOfRangeError,
    UnknownCorpusError,
)
from .model import ArgumentKind, Framework, active_subframework, effective_activation
from .preferences import classify
from .resolver import Decision, ExternalRank, Interactive, Lexicographic, mupcr
from .semantics import DEFAULT_SEMANTICS, SemanticsKind, evaluate

ROBOT_ROLE = "robot"
MAX_TIE_ROUNDS = 5
_ATTRIBUTION_EXACT_LIMIT = 10

_STATUS_BY_CODE = {
    "FORBIDDEN": 403,
    "UNKNOWN_ARGUMENT": 404,
    "UNKNOWN_CORPUS": 404,
    "UNKNOWN_SESSION": 404,
    "OUT_OF_RANGE": 404,
    "WOULD_CREATE_CYCLE": 409,
    "DUPLICATE_ID": 409,
}


class UnknownSessionError(GradargError):
    code = "UNKNOWN_SESSION"


@dataclass
class DecisionRecord:
    decision: Decision
    event_position: int  # events applied before this decision
    semantics: SemanticsKind
    strategy: str
    index: int


@dataclass
class TiePrompt:
    candidates: tuple[str, ...]
    round: int


@dataclass
class Session:
    id: str
    corpus_name: str
    af_text: str
    participants: dict[str, str]  # participant -> user id or "robot"
    seed_framework: Framework
    framework: Framework
    events: list[tuple[int, str, EditEvent]] = field(default_factory=list)
    decisions: list[DecisionRecord] = field(default_factory=list)
    pending_tie: TiePrompt | None = None
    toggles: tuple[str, ...] = ()
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def next_seq(self) -> int:
        return len(self.events) + 1


def _authorize(session: Session, actor: str, event: EditEvent) -> None:
    if actor not in session.participants:
        raise ForbiddenError(f"unknown participant {actor!r}")
    role = session.participants[actor]
    fw = session.framework

    def require_owner(argument_id: str) -> None:
        arg = fw.argument(argument_id)
        if arg.kind is ArgumentKind.TASK or arg.kind is ArgumentKind.OPTION:
            if role != ROBOT_ROLE:
                raise ForbiddenError(f"{actor} may not edit {arg.kind.value} argument {argument_id}")
        elif arg.owner != role:
            raise ForbiddenError(f"{actor} may not edit {argument_id} owned by {arg.owner}")

    if isinstance(event, (SetActive, SetBaseScore, RemoveArgument)):
        require_owner(event.argument_id)
    elif isinstance(event, AddArgument):
        arg = event.argument
        if arg.kind is ArgumentKind.TASK:
            if role != ROBOT_ROLE:
                raise ForbiddenError("only the robot may add task arguments")
        elif arg.owner != role:
            raise ForbiddenError(f"{actor} may only add arguments owned by {role}")
    elif isinstance(event, SetPreference):
        if event.user != role:
            raise ForbiddenError(f"{actor} may only state preferences for {role}")


class SessionStore:
    """Disk-backed session registry; journals replay on startup."""

    def __init__(self, directory: str | Path | None = None, corpus_dir: str | Path | None = None):
        self.directory = Path(directory) if directory is not None else None
        self.corpus_dir = corpus_dir
        self.sessions: dict[str, Session] = {}
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
            for journal in sorted(self.directory.glob("*.jsonl")):
                session = self._replay(journal.read_text(encoding="utf-8"))
                self.sessions[session.id] = session

    # -- journal ----------------------------------------------------------

    def _journal_path(self, session_id: str) -> Path | None:
        if self.directory is None:
            return None
        return self.directory / f"{session_id}.jsonl"

    def _append(self, session: Session, record: dict) -> None:
        path = self._journal_path(session.id)
        if path is None:
            return
        with open(path, "a", encoding="utf-8") as handle:
            handle.write(json.dumps(record, sort_keys=True) + "\n")

    def _replay(self, text: str) -> Session:
        lines = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not lines or lines[0].get("kind") != "meta":
            raise UnknownSessionError("journal missing meta record")
        meta = lines[0]
        session = self._build(
            session_id=meta["id"],
            corpus_name=meta["corpus"],
            af_text=meta["af_text"],
            participants=dict(meta["participants"]),
            toggles=tuple(meta.get("toggles", ())),
            persist=False,
        )
        for record in lines[1:]:
            if record["kind"] == "edit":
                self._apply_event(
                    session, record["actor"], event_from_dict(record["event"]), persist=False
                )
            elif record["kind"] == "decision_request":
                self._decide(
                    session,
                    SemanticsKind(record["semantics"]),
                    record["strategy"],
                    tuple(record.get("external_order", ())),
                    persist=False,
                )
        return session

    # -- lifecycle ----------------------------------------------------------

    def _build(
        self,
        session_id: str,
        corpus_name: str,
        af_text: str,
        participants: dict[str, str],
        toggles: tuple[str, ...],
        persist: bool,
    ) -> Session:
        framework, errors = try_parse_framework(SourceDocument(af_text, origin=corpus_name))
        if framework is None:
            raise InvalidAfError("invalid framework document", errors=errors)
        roles = set(participants.values())
        users = set(framework.users) | {ROBOT_ROLE}
        unknown = roles - users
        if unknown:
            raise UnknownCorpusError(f"participants bind unknown users {sorted(unknown)}")
        if len(roles) != len(participants):
            raise ForbiddenError("each user may be bound to at most one participant")
        if not toggles:
            toggles = tuple(
                aid for aid in sorted(framework.arguments) if not framework.is_option(aid)
            )
        session = Session(
            id=session_id,
            corpus_name=corpus_name,
            af_text=af_text,
            participants=participants,
            seed_framework=framework,
            framework=framework,
            toggles=toggles,
        )
        if persist:
            self._append(
                session,
                {
                    "kind": "meta",
                    "id": session.id,
                    "corpus": corpus_name,
                    "af_text": af_text,
                    "participants": participants,
                    "toggles": list(toggles),
                },
            )
        return session

    def create_session(
        self,
        corpus_name: str | None,
        participants: dict[str, str],
        af_text: str | None = None,
    ) -> Session:
        if af_text is None:
            if corpus_name is None:
                raise UnknownCorpusError("request must name a corpus or embed af_text")
            _, scenario = corpus_mod.load_corpus(corpus_name, self.corpus_dir)
            af_text = serialize_framework(scenario.framework)
            toggles = scenario.toggles
            corpus_name = scenario.name
        else:
            corpus_name = corpus_name or "<upload>"
            toggles = ()
        session = self._build(
            session_id=uuid.uuid4().hex[:12],
            corpus_name=corpus_name,
            af_text=af_text,
            participants=dict(participants),
            toggles=tuple(toggles),
            persist=True,
        )
        self.sessions[session.id] = session
        return session

    def get(self, session_id: str) -> Session:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise UnknownSessionError(f"no session {session_id!r}") from None

    # -- operations ----------------------------------------------------------

    def _apply_event(self, session: Session, actor: str, event: EditEvent, persist: bool) -> int:
        _authorize(session, actor, event)
        session.framework = apply_edit(session.framework, event)
        seq = session.next_seq()
        session.events.append((seq, actor, event))
        if persist:
            self._append(
                session,
                {"kind": "edit", "seq": seq, "actor": actor, "event": event_to_dict(event)},
            )
        return seq

    def post_event(self, session: Session, actor: str, event: EditEvent) -> int:
        with session.lock:
            return self._apply_event(session, actor, event, persist=True)

    def _decide(
        self,
        session: Session,
        kind: SemanticsKind,
        strategy_name: str,
        external_order: tuple[str, ...],
        persist: bool,
    ) -> DecisionRecord | TiePrompt:
        if persist:
            self._append(
                session,
                {
                    "kind": "decision_request",
                    "semantics": kind.value,
                    "strategy": strategy_name,
                    "external_order": list(external_order),
                },
            )
        if strategy_name == "interactive":
            return self._decide_interactive(session, kind)
        if strategy_name == "external_rank":
            strategy = ExternalRank(tuple(external_order))
        elif strategy_name == "lexicographic":
            strategy = Lexicographic()
        else:
            raise GradargError(f"unknown strategy {strategy_name!r}")
        decision = mupcr(session.framework, kind, strategy)
        session.pending_tie = None
        return self._record(session, decision, kind, strategy_name)

    def _decide_interactive(self, session: Session, kind: SemanticsKind) -> DecisionRecord | TiePrompt:
        probe = mupcr(session.framework, kind, Interactive(provider=None, max_rounds=0))
        rounds = session.pending_tie.round if session.pending_tie else 0
        if probe.fallback_reason is None:
            decision = Decision(
                selected=probe.selected,
                branch=probe.branch,
                candidate_set=probe.candidate_set,
                strengths=probe.strengths,
                tie=probe.tie,
                rounds=rounds,
                resolved=probe.resolved,
            )
            session.pending_tie = None
            return self._record(session, decision, kind, "interactive")
        if rounds >= MAX_TIE_ROUNDS:
            decision = Decision(
                selected=probe.selected,
                branch=probe.branch,
                candidate_set=probe.candidate_set,
                strengths=probe.strengths,
                tie=True,
                rounds=rounds,
                resolved=False,
                fallback_reason="MAX_ROUNDS_EXCEEDED",
            )
            session.pending_tie = None
            return self._record(session, decision, kind, "interactive")
        session.pending_tie = TiePrompt(candidates=probe.candidate_set, round=rounds + 1)
        return session.pending_tie

    def request_decision(
        self,
        session: Session,
        kind: SemanticsKind = DEFAULT_SEMANTICS,
        strategy_name: str = "lexicographic",
        external_order: tuple[str, ...] = (),
    ) -> DecisionRecord | TiePrompt:
        with session.lock:
            return self._decide(session, kind, strategy_name, external_order, persist=True)

    def _record(self, session: Session, decision: Decision, kind: SemanticsKind, strategy: str) -> DecisionRecord:
        record = DecisionRecord(
            decision=decision,
            event_position=len(session.events),
            semantics=kind,
            strategy=strategy,
            index=len(session.decisions),
        )
        session.decisions.append(record)
        return record

    def framework_at(self, session: Session, event_position: int) -> Framework:
        framework = session.seed_framework
        for seq, _, event in session.events[:event_position]:
            framework = apply_edit(framework, event)
        return framework

    def explanation(
        self,
        session: Session,
        decision_index: int,
        method: str = "auto",
        samples: int = 20000,
        seed: int = 0,
    ) -> dict:
        if not 0 <= decision_index < len(session.decisions):
            raise OutOfRangeError(f"no decision {decision_index}")
        record = session.decisions[decision_index]
        framework = self.framework_at(session, record.event_position)
        active = active_subframework(framework)
        if method == "exact" or (method == "auto" and len(active.relations) <= _ATTRIBUTION_EXACT_LIMIT):
            chosen = ExactShapley()
        else:
            chosen = PermutationSampling(samples=samples, seed=seed)
        table = relation_attribution(active, chosen, kind=record.semantics)
        return {
            "decision_index": decision_index,
            "selected": record.decision.selected,
            "branch": record.decision.branch,
            "candidate_set": list(record.decision.candidate_set),
            "strengths": dict(record.decision.strengths),
            "method": (
                {"name": "exact"}
                if isinstance(chosen, ExactShapley)
                else {"name": "sampling", "samples": chosen.samples, "seed": chosen.seed}
            ),
            "final_strengths": table.final_strengths,
            "attribution": [
                {
                    "polarity": rel.polarity.value,
                    "source": rel.source,
                    "target": rel.target,
                    "contribution": {o: table.contributions[o][i] for o in table.options},
                    "stderr": {o: table.stderr_of(rel, o) for o in table.options},
                }
                for i, rel in enumerate(table.relations)
            ],
        }


# -- wire format -----------------------------------------------------------


def _framework_to_dict(framework: Framework) -> dict:
    activation = effective_activation(framework)
    return {
        "options": list(framework.options),
        "users": list(framework.users),
        "arguments": [
            {
                "id": arg.id,
                "kind": arg.kind.value,
                "label": arg.label,
                "owner": arg.owner,
                "base_score": arg.base_score,
                "active": activation[arg.id],
                "derived_active_from": list(arg.derived_active_from),
            }
            for arg in framework.arguments.values()
        ],
        "relations": [
            {"source": r.source, "target": r.target, "polarity": r.polarity.value}
            for r in framework.relations
        ],
        "preferences": [
            {"user": u, "option": o, "sign": s.value} for u, o, s in sorted(framework.preferences.items())
        ],
    }


def _decision_to_dict(record: DecisionRecord) -> dict:
    decision = record.decision
    return {
        "type": "decision",
        "index": record.index,
        "selected": decision.selected,
        "branch": decision.branch,
        "candidate_set": list(decision.candidate_set),
        "strengths": dict(decision.strengths),
        "tie": decision.tie,
        "rounds": decision.rounds,
        "resolved": decision.resolved,
        "fallback_reason": decision.fallback_reason,
        "semantics": record.semantics.value,
        "strategy": record.strategy,
        "event_position": record.event_position,
    }


def _session_snapshot(store: SessionStore, session: Session) -> dict:
    strengths = evaluate(session.framework)
    if session.framework.users and session.framework.options:
        cls = classify(session.framework.total_preferences())
        conflict = {"labels": sorted(cls.labels), "overall": cls.overall.value}
    else:
        conflict = None
    return {
        "id": session.id,
        "corpus": session.corpus_name,
        "participants": session.participants,
        "toggles": list(session.toggles),
        "framework": _framework_to_dict(session.framework),
        "strengths": dict(strengths),
        "conflict": conflict,
        "event_count": len(session.events),
        "decisions": [_decision_to_dict(r) for r in session.decisions],
        "pending_tie": (
            {"candidates": list(session.pending_tie.candidates), "round": session.pending_tie.round}
            if session.pending_tie
            else None
        ),
    }


def create_app(
    store: SessionStore | None = None,
    *,
    corpus_dir: str | Path | None = None,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    """Assemble the HTTP API; all state lives in the given store."""
    store = store or SessionStore(corpus_dir=corpus_dir)
    app = FastAPI(title="gradarg session service", version="0.1.0")

    @app.exception_handler(GradargError)
    async def _domain_error(request: Request, exc: GradargError):
        status = _STATUS_BY_CODE.get(exc.code, 400)
        detail: Any = exc.detail
        if isinstance(exc, InvalidAfError):
            detail = [
                {"line": e.line, "column": e.column, "code": e.code, "message": e.message}
                for e in exc.errors
            ]
        return JSONResponse(
            status_code=status,
            content={"code": exc.code, "message": str(exc), "detail": detail},
        )

    @app.get("/corpora")
    def corpora():
        names = corpus_mod.list_corpora(store.corpus_dir)
        out = []
        for name in names:
            framework, scenario = corpus_mod.load_corpus(name, store.corpus_dir)
            out.append(
                {
                    "name": name,
                    "options": list(framework.options),
                    "arguments": len(framework.arguments),
                    "relations": len(framework.relations),
                    "toggles": list(scenario.toggles),
                }
            )
        return out

    @app.post("/sessions", status_code=201)
    def create_session(body: dict):
        session = store.create_session(
            corpus_name=body.get("corpus"),
            participants=dict(body.get("participants", {})),
            af_text=body.get("af_text"),
        )
        return _session_snapshot(store, session)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return _session_snapshot(store, store.get(session_id))

    @app.get("/sessions/{session_id}/strengths")
    def get_strengths(session_id: str, semantics: str = "quadratic_energy"):
        session = store.get(session_id)
        strengths = evaluate(session.framework, SemanticsKind.from_token(semantics))
        return {
            "strengths": dict(strengths),
            "converged": strengths.converged,
            "iterations": strengths.iterations,
            "method": strengths.method,
        }

    @app.post("/sessions/{session_id}/events")
    def post_event(session_id: str, body: dict):
        session = store.get(session_id)
        event = event_from_dict(body.get("event", {}))
        seq = store.post_event(session, body.get("actor", ""), event)
        strengths = evaluate(session.framework)
        return {
            "seq": seq,
            "strengths": dict(strengths),
            "active": sorted(aid for aid, on in effective_activation(session.framework).items() if on),
        }

    @app.post("/sessions/{session_id}/decision")
    def post_decision(session_id: str, body: dict | None = None):
        body = body or {}
        session = store.get(session_id)
        result = store.request_decision(
            session,
            kind=SemanticsKind.from_token(body.get("semantics", "quadratic_energy")),
            strategy_name=body.get("strategy", "lexicographic"),
            external_order=tuple(body.get("external_order", ())),
        )
        if isinstance(result, TiePrompt):
            return {
                "type": "tie_prompt",
                "candidates": list(result.candidates),
                "round": result.round,
            }
        return _decision_to_dict(result)

    @app.get("/sessions/{session_id}/decisions/{index}/explanation")
    def get_explanation(
        session_id: str,
        index: int,
        method: str = "auto",
        samples: int = 20000,
        seed: int = 0,
    ):
        session = store.get(session_id)
        return store.explanation(session, index, method=method, samples=samples, seed=seed)

    @app.get("/sessions/{session_id}/sweep")
    def get_sweep(session_id: str, target: str, points: int = 11, semantics: str = "quadratic_energy"):
        session = store.get(session_id)
        if points < 2:
            raise OutOfRangeError("points must be at least 2")
        scenario = Scenario(
            name=session.corpus_name,
            framework=session.framework,
            toggles=tuple(t for t in session.toggles if t in session.framework.arguments),
        )
        grid = [i / (points - 1) for i in range(points)]
        result = base_score_sweep(scenario, target, grid, SemanticsKind.from_token(semantics))
        return PlainTextResponse(sweep_to_csv(result), media_type="text/csv")

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
