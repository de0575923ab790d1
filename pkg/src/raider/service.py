"""HTTP session service: interactive detection and recovery over a scene copy.

Each session owns a private scene. Commands serialize through a per-session
lock; an append-only, densely numbered event log feeds any number of
server-sent-event subscribers. Scene mutations received while a run is in
flight are queued and applied only between loop iterations / plan steps, so
a given event order fully determines the run.
"""

from __future__ import annotations

import json
import queue
import threading
import uuid
from typing import Iterator, Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import StreamingResponse
from pydantic import BaseModel, Field

from . import SCENES_DIR
from .gateway import ChatConfig, HttpBackend, ScriptedBackend
from .pfm import RunConfig, run as run_detection
from .prompts import PROCEDURE_VARIANTS, PromptConfig
from .recovery import (
    InteractionChannel,
    PlanError,
    execute_plan,
    parse_plan,
)
from .scene import Scene, SceneError, SceneMutation, compute_relations, load_scene
from .tools import ToolRegistry

EVENT_KINDS = (
    "llm_message",
    "tool_call",
    "tool_result",
    "warning",
    "outcome",
    "plan_step",
    "ask_pending",
    "utterance",
    "scene_changed",
)

SESSION_STATES = ("idle", "detecting", "awaiting_answer", "executing_plan", "done")

_REGISTRY = ToolRegistry()


# -- request / response models --------------------------------------------------


class CreateSessionRequest(BaseModel):
    scene: dict | str
    profile: str = "household"
    variant: str = "QGEN_GRND"


class CreateSessionResponse(BaseModel):
    id: str
    state: str


class DetectRequest(BaseModel):
    query: str = Field(min_length=1)
    responses: Optional[list[str]] = None  # scripted backend; None -> live HTTP
    deadline_seconds: float = 20.0
    iteration_cap: int = 12


class AnswerRequest(BaseModel):
    text: str = Field(min_length=1)


class MutateRequest(BaseModel):
    """A scene mutation: `kind` plus the kind-specific payload fields."""

    model_config = {"extra": "allow"}

    kind: str


class RecoverRequest(BaseModel):
    plan: str = Field(min_length=1)


class Accepted(BaseModel):
    state: str
    seq: int


# -- session ---------------------------------------------------------------------


class Session:
    def __init__(self, scene: Scene, profile: str, variant: str) -> None:
        self.id = uuid.uuid4().hex[:12]
        self.scene = scene
        self.profile = profile
        self.variant = variant
        self.state = "idle"
        self.events: list[dict] = []
        self.cond = threading.Condition()
        self.mutations: queue.Queue[SceneMutation] = queue.Queue()
        self.pending_ask: Optional[str] = None
        self.pending_answer: Optional[str] = None

    # All event/state access happens under self.cond.

    def emit(self, kind: str, payload: dict) -> int:
        with self.cond:
            return self._emit_locked(kind, payload)

    def _emit_locked(self, kind: str, payload: dict) -> int:
        event = {"seq": len(self.events) + 1, "kind": kind, "payload": payload}
        self.events.append(event)
        self.cond.notify_all()
        return event["seq"]

    def snapshot_payload(self, mutation: Optional[dict] = None) -> dict:
        scene = self.scene
        relations = [
            {"relation": r.relation, "subject": r.subject, "object": r.object}
            for r in compute_relations(scene)
        ]
        return {
            "mutation": mutation,
            "snapshot": scene.to_dict(),
            "relations": relations,
            "paths": {oid: scene.check_free_path(oid) for oid in scene.object_ids()},
        }

    def drain_mutations(self) -> None:
        while True:
            try:
                mutation = self.mutations.get_nowait()
            except queue.Empty:
                return
            self.scene.apply_mutation(mutation)
            self.emit("scene_changed", self.snapshot_payload({"kind": mutation.kind, **mutation.payload}))


class SessionChannel(InteractionChannel):
    """Bridges plan execution to the HTTP answer endpoint."""

    def __init__(self, session: Session, answer_timeout: float) -> None:
        self.session = session
        self.answer_timeout = answer_timeout

    def ask(self, question: str) -> str:
        s = self.session
        with s.cond:
            s.pending_ask = question
            s.pending_answer = None
            s.state = "awaiting_answer"
            s._emit_locked("ask_pending", {"question": question})
            ok = s.cond.wait_for(
                lambda: s.pending_answer is not None, timeout=self.answer_timeout
            )
            if not ok:
                s.pending_ask = None
                raise PlanError(f"no answer to {question!r} within the timeout")
            answer = s.pending_answer
            s.pending_ask = None
            s.pending_answer = None
            s.state = "executing_plan"
        return answer

    def emit(self, utterance: str) -> None:
        self.session.emit("utterance", {"text": utterance})


# -- app --------------------------------------------------------------------------


def create_app(
    cors_origins: Optional[list[str]] = None,
    answer_timeout: float = 300.0,
) -> FastAPI:
    app = FastAPI(title="raider session service")
    if cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=cors_origins,
            allow_methods=["*"],
            allow_headers=["*"],
        )

    sessions: dict[str, Session] = {}
    sessions_lock = threading.Lock()

    def get_session(session_id: str) -> Session:
        with sessions_lock:
            session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return session

    @app.post("/sessions", response_model=CreateSessionResponse)
    def create_session(req: CreateSessionRequest) -> CreateSessionResponse:
        source = req.scene
        if isinstance(source, str):
            path = SCENES_DIR / f"{source}.json" if "/" not in source else source
            try:
                scene = load_scene(path)
            except (SceneError, OSError) as exc:
                raise HTTPException(status_code=400, detail=str(exc))
        else:
            try:
                scene = load_scene(source)
            except SceneError as exc:
                raise HTTPException(status_code=400, detail=str(exc))
        if req.variant not in PROCEDURE_VARIANTS:
            raise HTTPException(status_code=400, detail=f"unknown variant {req.variant!r}")
        try:
            _REGISTRY.profile(req.profile)
        except ValueError:
            raise HTTPException(status_code=400, detail=f"unknown profile {req.profile!r}")
        session = Session(scene, req.profile, req.variant)
        with sessions_lock:
            sessions[session.id] = session
        session.emit("scene_changed", session.snapshot_payload())
        return CreateSessionResponse(id=session.id, state=session.state)

    @app.get("/sessions/{session_id}")
    def session_info(session_id: str) -> dict:
        session = get_session(session_id)
        with session.cond:
            return {
                "id": session.id,
                "state": session.state,
                "events": len(session.events),
                "pending_ask": session.pending_ask,
            }

    @app.post("/sessions/{session_id}/detect", response_model=Accepted)
    def detect(session_id: str, req: DetectRequest) -> Accepted:
        session = get_session(session_id)
        with session.cond:
            if session.state != "idle":
                raise HTTPException(
                    status_code=409, detail=f"cannot detect while {session.state}"
                )
            session.state = "detecting"
        if req.responses is not None:
            backend = ScriptedBackend.from_texts(req.responses)
        else:
            backend = HttpBackend()
        config = RunConfig(
            prompt=PromptConfig(variant=session.variant, profile=session.profile),
            chat=ChatConfig(),
            deadline_seconds=req.deadline_seconds,
            iteration_cap=req.iteration_cap,
        )

        def worker() -> None:
            try:
                run_detection(
                    req.query,
                    session.scene,
                    _REGISTRY,
                    backend,
                    config,
                    observer=session.emit,
                    on_iteration=session.drain_mutations,
                )
            except Exception as exc:  # transport/config faults become events
                session.emit("outcome", {"label": "transport_failure", "explanation": str(exc)})
            finally:
                with session.cond:
                    session.state = "idle"
                    session.cond.notify_all()

        threading.Thread(target=worker, daemon=True).start()
        return Accepted(state="detecting", seq=len(session.events))

    @app.post("/sessions/{session_id}/answer", response_model=Accepted)
    def answer(session_id: str, req: AnswerRequest) -> Accepted:
        session = get_session(session_id)
        with session.cond:
            if session.state != "awaiting_answer" or session.pending_ask is None:
                raise HTTPException(status_code=409, detail="no pending ask")
            if session.pending_answer is not None:
                raise HTTPException(status_code=409, detail="ask already answered")
            session.pending_answer = req.text
            session.cond.notify_all()
            return Accepted(state=session.state, seq=len(session.events))

    @app.post("/sessions/{session_id}/mutate", response_model=Accepted)
    def mutate(session_id: str, req: MutateRequest) -> Accepted:
        session = get_session(session_id)
        try:
            mutation = SceneMutation.from_dict(req.model_dump())
        except SceneError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        with session.cond:
            # Validate against a copy first so bad mutations never half-apply.
            try:
                session.scene.copy().apply_mutation(mutation)
            except (SceneError, KeyError, ValueError) as exc:
                raise HTTPException(status_code=400, detail=str(exc))
            if session.state == "idle" or session.state == "done":
                session.scene.apply_mutation(mutation)
                seq = session._emit_locked(
                    "scene_changed", session.snapshot_payload({"kind": mutation.kind, **mutation.payload})
                )
            else:
                session.mutations.put(mutation)
                seq = len(session.events)
            return Accepted(state=session.state, seq=seq)

    @app.post("/sessions/{session_id}/recover", response_model=Accepted)
    def recover(session_id: str, req: RecoverRequest) -> Accepted:
        session = get_session(session_id)
        try:
            plan = parse_plan(req.plan)
        except PlanError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        with session.cond:
            if session.state != "idle":
                raise HTTPException(
                    status_code=409, detail=f"cannot recover while {session.state}"
                )
            session.state = "executing_plan"
        channel = SessionChannel(session, answer_timeout)

        def worker() -> None:
            try:
                log = execute_plan(
                    plan,
                    session.scene,
                    channel,
                    on_step=lambda record: session.emit(
                        "plan_step",
                        {
                            "statement": record.statement,
                            "status": record.status,
                            "detail": record.detail,
                        },
                    ),
                    between_steps=session.drain_mutations,
                )
                session.emit(
                    "outcome",
                    {
                        "label": "plan_halted" if log.halted else "plan_complete",
                        "explanation": "",
                        "steps": len(log.steps),
                    },
                )
            except PlanError as exc:
                session.emit("outcome", {"label": "plan_error", "explanation": str(exc)})
            finally:
                with session.cond:
                    session.state = "done"
                    session.cond.notify_all()

        threading.Thread(target=worker, daemon=True).start()
        return Accepted(state="executing_plan", seq=len(session.events))

    @app.get("/sessions/{session_id}/events")
    def events(session_id: str, from_seq: int = 1, follow: bool = True) -> StreamingResponse:
        session = get_session(session_id)

        def render(event: dict) -> str:
            return f"id: {event['seq']}\ndata: {json.dumps(event)}\n\n"

        def stream() -> Iterator[str]:
            next_seq = max(1, from_seq)
            while True:
                with session.cond:
                    while next_seq <= len(session.events):
                        event = session.events[next_seq - 1]
                        next_seq += 1
                        yield render(event)
                    if not follow:
                        return
                    if session.state == "done" and next_seq > len(session.events):
                        return
                    session.cond.wait(timeout=0.5)

        return StreamingResponse(stream(), media_type="text/event-stream")

    return app


app = create_app()
