"""HTTP service: session endpoints, ordered event stream, persistence wiring.

Concurrency model: the HTTP handler appends user messages inline under the
session lock (so the 202 means the message is in), while assistant replies and
cue refreshes run on a per-session worker thread in FIFO order and materials
jobs run on a shared executor. Every frame is persisted and fanned out to
subscribers in one step under the lock, which is what keeps the stream, the
log, and the snapshot telling the same story.
"""

from __future__ import annotations

import json
import queue
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from contextlib import asynccontextmanager
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterator, Optional

from fastapi import Body, FastAPI, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response, StreamingResponse

from . import gateway as gw
from .catalog import default_catalog, load_catalog
from .config import ServiceConfig
from .model import (
    ACCEPTED_IMAGE_TYPES,
    DesignArtifact,
    EventFrame,
    FeedstackError,
    NotFoundError,
    Role,
    SessionState,
    ValidationError,
    artifact_from_wire,
    artifact_to_wire,
    bookmark_to_wire,
    catalog_to_wire,
    chapter_to_wire,
    frame_to_wire,
    message_to_wire,
    span_to_wire,
    suggestion_to_wire,
)
from .scaffold import cues_for_principle, cue_transcript_tail, materials_for_variables, materials_variables
from .session import (
    append_message,
    create_session,
    error_frame,
    export_json,
    materials_ready_frame,
    pending_material_principles,
    set_toggle,
    suggestions_frame,
)
from .store import SessionStore, StorageError

SUBSCRIBER_BUFFER = 1024
KEEPALIVE_SECONDS = 1.0


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class _Subscriber:
    def __init__(self) -> None:
        self.frames: queue.Queue[EventFrame] = queue.Queue(maxsize=SUBSCRIBER_BUFFER)
        self.overflowed = False


class SessionRuntime:
    """One session's live machinery: state, lock, worker, subscribers."""

    def __init__(self, state: SessionState, store: SessionStore, config: ServiceConfig):
        self.state = state
        self.store = store
        self.config = config
        self.lock = threading.RLock()
        self.subscribers: list[_Subscriber] = []
        self.pending_jobs = 0
        self.jobs: queue.Queue = queue.Queue()
        self.worker = threading.Thread(
            target=self._run_jobs, name=f"feedstack-{state.session_id}", daemon=True
        )
        self.worker.start()

    # -- frame plumbing ----------------------------------------------------

    def commit(self, frame: EventFrame) -> None:
        """Persist one already-folded frame and fan it out. Call under lock."""
        self.store.persist_event(frame)
        for sub in list(self.subscribers):
            if sub.overflowed:
                continue
            try:
                sub.frames.put_nowait(frame)
            except queue.Full:
                sub.overflowed = True

    def subscribe(self) -> tuple[_Subscriber, int]:
        """Register a subscriber; returns it plus the seq it joined at."""
        with self.lock:
            sub = _Subscriber()
            self.subscribers.append(sub)
            return sub, self.state.last_seq

    def unsubscribe(self, sub: _Subscriber) -> None:
        with self.lock:
            if sub in self.subscribers:
                self.subscribers.remove(sub)

    # -- jobs ---------------------------------------------------------------

    def enqueue(self, job) -> None:
        with self.lock:
            self.pending_jobs += 1
        self.jobs.put(job)

    def job_done(self) -> None:
        with self.lock:
            self.pending_jobs -= 1

    def _run_jobs(self) -> None:
        while True:
            job = self.jobs.get()
            if job is None:
                return
            try:
                job()
            except Exception as exc:  # keep the worker alive whatever happens
                with self.lock:
                    frame = error_frame(
                        self.state, "internal", f"background job failed: {exc}", at=_now()
                    )
                    self.commit(frame)
            finally:
                self.job_done()

    def stop(self) -> None:
        self.jobs.put(None)

    # -- pipeline steps -----------------------------------------------------

    def post_user_message(self, text: str) -> str:
        """Append the user message inline, then queue the assistant reply."""
        with self.lock:
            message, frames = append_message(self.state, Role.USER, text, at=_now())
            for frame in frames:
                self.commit(frame)
            self._spawn_materials(frames)
        self.enqueue(lambda: self._assistant_job(text))
        return message.id

    def _spawn_materials(self, frames) -> None:
        """Pin materials inputs for newly discovered chapters. Call under lock."""
        for principle_id in pending_material_principles(frames):
            principle = self.state.catalog.get(principle_id)
            variables = materials_variables(principle, self.state)
            self.pending_jobs += 1
            _MATERIALS_POOL.submit(self._materials_job, principle_id, variables)

    def _materials_job(self, principle_id: str, variables: dict[str, str]) -> None:
        try:
            materials = materials_for_variables(variables, self.config.gateway)
            with self.lock:
                frame = materials_ready_frame(self.state, principle_id, materials, at=_now())
                self.commit(frame)
        except Exception as exc:
            with self.lock:
                frame = error_frame(
                    self.state, "internal", f"materials job failed: {exc}", at=_now()
                )
                self.commit(frame)
        finally:
            self.job_done()

    def _assistant_job(self, user_text: str) -> None:
        with self.lock:
            transcript = "\n".join(
                f"{m.role.value}: {m.text}" for m in self.state.messages[-8:]
            )
        request = gw.CompletionRequest(
            template_id=gw.TemplateId.ASSISTANT_REPLY,
            variables={"text": user_text, "transcript": transcript},
        )
        degraded: Optional[str] = None
        try:
            reply = gw.complete(request, self.config.gateway)
        except gw.GatewayError as exc:
            reply = gw.stub_completion(request)
            degraded = str(exc)
        with self.lock:
            if degraded is not None:
                self.commit(
                    error_frame(
                        self.state,
                        "gateway_degraded",
                        f"assistant reply degraded to stub: {degraded}",
                        at=_now(),
                    )
                )
            _, frames = append_message(self.state, Role.ASSISTANT, reply, at=_now())
            for frame in frames:
                self.commit(frame)
            self._spawn_materials(frames)
        self.enqueue(self._cue_job)

    def _cue_job(self) -> None:
        with self.lock:
            if not self.state.mentions or not any(
                m.role is Role.ASSISTANT for m in self.state.messages
            ):
                return
            principle = self.state.catalog.get(self.state.mentions[-1].principle_id)
            transcript = cue_transcript_tail(self.state)
        warnings: list[str] = []
        cues = cues_for_principle(principle, transcript, self.config.gateway, warnings=warnings)
        with self.lock:
            for warning in warnings:
                self.commit(error_frame(self.state, "gateway_degraded", warning, at=_now()))
            self.commit(suggestions_frame(self.state, cues, at=_now()))

    def set_toggle(self, principle_id: str, enabled: bool) -> EventFrame:
        with self.lock:
            frame = set_toggle(self.state, principle_id, enabled)
            self.commit(frame)
            return frame

    def snapshot(self) -> dict[str, Any]:
        with self.lock:
            s = self.state
            return {
                "session_id": s.session_id,
                "created_at": s.created_at,
                "artifact": artifact_to_wire(s.artifact) if s.artifact else None,
                "catalog": catalog_to_wire(s.catalog),
                "messages": [message_to_wire(m) for m in s.messages],
                "mentions": [span_to_wire(x) for x in s.mentions],
                "chapters": {
                    p.id: chapter_to_wire(s.chapters[p.id]) for p in s.catalog.principles
                },
                "bookmarks": [bookmark_to_wire(b) for b in s.bookmarks],
                "suggestions": [suggestion_to_wire(x) for x in s.suggestions],
                "toggles": dict(s.toggles),
                "last_seq": s.last_seq,
                "pending_jobs": self.pending_jobs,
            }

    def export_bytes(self) -> bytes:
        with self.lock:
            return export_json(self.state).encode("utf-8")


_MATERIALS_POOL = ThreadPoolExecutor(max_workers=4, thread_name_prefix="feedstack-materials")


class ServiceRuntime:
    """All live sessions plus the shared store and catalog."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.store = SessionStore(config.storage_dir)
        self.catalog = (
            load_catalog(config.catalog_path) if config.catalog_path else default_catalog()
        )
        self.sessions: dict[str, SessionRuntime] = {}
        self._lock = threading.Lock()

    def create_session(self, artifact: Optional[DesignArtifact]) -> SessionRuntime:
        state = create_session(
            self.catalog,
            artifact,
            session_id=uuid.uuid4().hex,
            created_at=_now(),
        )
        self.store.create(state)
        runtime = SessionRuntime(state, self.store, self.config)
        with self._lock:
            self.sessions[state.session_id] = runtime
        return runtime

    def get(self, session_id: str) -> SessionRuntime:
        with self._lock:
            runtime = self.sessions.get(session_id)
            if runtime is None:
                # A restart may have live logs on disk without a live runtime.
                if not self.store.exists(session_id):
                    raise NotFoundError(f"unknown session: {session_id!r}")
                state = self.store.load_session(session_id)
                runtime = SessionRuntime(state, self.store, self.config)
                self.sessions[session_id] = runtime
        return runtime

    def stop(self) -> None:
        with self._lock:
            for runtime in self.sessions.values():
                runtime.stop()


def _api_error(status: int, code: str, detail: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, "detail": detail})


def create_app(config: Optional[ServiceConfig] = None) -> FastAPI:
    cfg = config if config is not None else ServiceConfig()
    runtime = ServiceRuntime(cfg)

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        yield
        runtime.stop()

    app = FastAPI(title="feedstack", docs_url=None, redoc_url=None, lifespan=lifespan)
    app.state.runtime = runtime

    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(NotFoundError)
    async def _not_found(_req: Request, exc: NotFoundError):
        return _api_error(404, "not_found", str(exc))

    @app.exception_handler(ValidationError)
    async def _validation(_req: Request, exc: ValidationError):
        return _api_error(422, "validation", str(exc))

    @app.exception_handler(StorageError)
    async def _storage(_req: Request, exc: StorageError):
        return _api_error(500, "internal", str(exc))

    @app.exception_handler(RequestValidationError)
    async def _req_validation(_req: Request, exc: RequestValidationError):
        return _api_error(422, "validation", str(exc))

    @app.exception_handler(FeedstackError)
    async def _feedstack(_req: Request, exc: FeedstackError):
        return _api_error(500, "internal", str(exc))

    @app.post("/v1/sessions", status_code=201)
    def create_session_endpoint(body: Optional[dict] = Body(default=None)):
        data = body or {}
        catalog_id = data.get("catalog_id", "default")
        if catalog_id != "default":
            raise NotFoundError(f"unknown catalog: {catalog_id!r}")
        artifact = None
        if data.get("artifact") is not None:
            raw = data["artifact"]
            if not isinstance(raw, dict) or "name" not in raw or "media_type" not in raw:
                raise ValidationError("artifact needs name and media_type")
            if raw["media_type"] not in ACCEPTED_IMAGE_TYPES:
                raise ValidationError(f"unsupported artifact media type {raw['media_type']!r}")
            artifact = artifact_from_wire(raw)
        session = runtime.create_session(artifact)
        return {"session_id": session.state.session_id}

    @app.post("/v1/sessions/{session_id}/messages", status_code=202)
    def post_message(session_id: str, body: dict = Body(...)):
        session = runtime.get(session_id)
        text = body.get("text")
        if not isinstance(text, str) or not text.strip():
            raise ValidationError("message text is empty")
        message_id = session.post_user_message(text)
        return {"message_id": message_id}

    @app.post("/v1/sessions/{session_id}/toggles")
    def post_toggle(session_id: str, body: dict = Body(...)):
        session = runtime.get(session_id)
        principle_id = body.get("principle_id")
        enabled = body.get("enabled")
        if not isinstance(principle_id, str) or not isinstance(enabled, bool):
            raise ValidationError("toggle body needs principle_id (string) and enabled (boolean)")
        session.set_toggle(principle_id, enabled)
        return {"principle_id": principle_id, "enabled": enabled}

    @app.get("/v1/sessions/{session_id}")
    def get_snapshot(session_id: str):
        return runtime.get(session_id).snapshot()

    @app.get("/v1/sessions/{session_id}/export")
    def get_export(session_id: str):
        payload = runtime.get(session_id).export_bytes()
        return Response(content=payload, media_type="application/json")

    @app.post("/v1/sessions/{session_id}/artifact")
    def upload_artifact(session_id: str, file: UploadFile):
        session = runtime.get(session_id)
        media_type = file.content_type or ""
        if media_type not in ACCEPTED_IMAGE_TYPES:
            raise ValidationError(f"unsupported artifact media type {media_type!r}")
        suffix = Path(file.filename or "artifact").suffix or ".bin"
        ref = f"{session_id}.artifact{suffix}"
        target = Path(cfg.storage_dir) / ref
        target.write_bytes(file.file.read())
        artifact = DesignArtifact(
            name=file.filename or "artifact", media_type=media_type, content_ref=ref
        )
        with session.lock:
            session.state.artifact = artifact
            runtime.store.write_meta(session.state)
        return artifact_to_wire(artifact)

    @app.get("/v1/sessions/{session_id}/events")
    def stream_events(session_id: str, from_seq: int = 0):
        session = runtime.get(session_id)

        def frame_lines() -> Iterator[str]:
            sub, _joined_at = session.subscribe()
            try:
                cursor = from_seq
                # History first: everything already persisted past the cursor.
                # The subscription predates this read, so anything newer is
                # waiting in the queue; skipping seqs at or below the cursor
                # removes the overlap.
                for frame in runtime.store.read_frames(session_id, from_seq=cursor):
                    cursor = frame.seq
                    yield json.dumps(frame_to_wire(frame), ensure_ascii=False) + "\n"
                while True:
                    if sub.overflowed:
                        err = {
                            "seq": cursor,
                            "session_id": session_id,
                            "type": "error",
                            "payload": {
                                "code": "conflict",
                                "detail": "subscriber buffer overflowed; reconnect with from_seq",
                            },
                            "at": _now(),
                        }
                        yield json.dumps(err, ensure_ascii=False) + "\n"
                        return
                    try:
                        frame = sub.frames.get(timeout=KEEPALIVE_SECONDS)
                    except queue.Empty:
                        yield "\n"  # keepalive
                        continue
                    if frame.seq <= cursor:
                        continue
                    cursor = frame.seq
                    yield json.dumps(frame_to_wire(frame), ensure_ascii=False) + "\n"
            finally:
                session.unsubscribe(sub)

        return StreamingResponse(frame_lines(), media_type="application/x-ndjson")

    return app
