"""The two independently deployable services.

* dialogue gateway: session API + server-push event stream (SSE with
  sequence-number resumption).
* media service: stub TTS synthesis with content-addressed assets, plus the
  static product-image directory keyed by routing id.

The gateway stays fully functional with the media service replaced by the
in-process stub synthesizer. Endpoint paths and payloads are documented
bit-exact in docs/api.md.
"""
from __future__ import annotations

import asyncio
import logging
import threading
import uuid
from contextlib import asynccontextmanager
from pathlib import Path
from typing import AsyncIterator, Optional

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse, Response, StreamingResponse

from .backends import GenerationBackend, RemoteBackend, StubBackend
from .catalogue import Catalogue, load_catalogue, load_default_catalogue
from .config import default_config
from .dialogue import AblationFlags
from .media import (
    RemoteSynthClient,
    StubSynthesizer,
    Synthesizer,
    UnknownAssetError,
    default_image_dir,
    product_image,
)
from .pipeline import PipelineSettings
from .runtime import LiveSession
from .session import SessionConfig

logger = logging.getLogger(__name__)

TICK_INTERVAL_S = 0.05
SSE_POLL_S = 0.05


def _session_config_from(cfg: dict, overrides: Optional[dict]) -> SessionConfig:
    base = cfg["session"]
    overrides = overrides or {}
    unknown = set(overrides) - {"hold_period_ms", "comment_queue_capacity",
                                "speaking_rate_cps", "ablation"}
    if unknown:
        raise ValueError(f"unknown session config fields: {sorted(unknown)}")
    ablation = overrides.get("ablation") or {}
    config = SessionConfig(
        hold_period_ms=int(overrides.get("hold_period_ms", base["hold_period_ms"])),
        comment_queue_capacity=int(overrides.get("comment_queue_capacity",
                                                 base["comment_queue_capacity"])),
        ablation=AblationFlags(
            tt_disabled=bool(ablation.get("tt_disabled", False)),
            pci_disabled=bool(ablation.get("pci_disabled", False)),
            rr_disabled=bool(ablation.get("rr_disabled", False)),
        ),
        speaking_rate_cps=float(overrides.get("speaking_rate_cps", base["speaking_rate_cps"])),
    )
    config.validate()
    return config


class SessionManager:
    """Owns the live sessions and the wall-clock ticker driving their timers."""

    def __init__(
        self,
        cfg: dict,
        catalogue: Catalogue,
        backend: GenerationBackend,
        synth: Optional[Synthesizer],
        event_log_dir: Optional[Path] = None,
    ):
        self.cfg = cfg
        self.catalogue = catalogue
        self.backend = backend
        self.synth = synth
        self.event_log_dir = event_log_dir
        self.settings = PipelineSettings.from_config(cfg)
        self.sessions: dict[str, LiveSession] = {}
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._ticker: Optional[threading.Thread] = None

    def start_ticker(self) -> None:
        if self._ticker is not None:
            return
        self._stop.clear()
        self._ticker = threading.Thread(target=self._tick_loop, daemon=True,
                                        name="livehost-ticker")
        self._ticker.start()

    def stop_ticker(self) -> None:
        self._stop.set()
        if self._ticker is not None:
            self._ticker.join(timeout=2)
            self._ticker = None

    def _tick_loop(self) -> None:
        while not self._stop.wait(TICK_INTERVAL_S):
            for session in list(self.sessions.values()):
                try:
                    session.tick()
                except Exception:  # keep other sessions alive
                    logger.exception("tick failed for session %s", session.session_id)

    def create(self, overrides: Optional[dict]) -> LiveSession:
        session_config = _session_config_from(self.cfg, overrides)
        session_id = uuid.uuid4().hex[:12]
        log_path = (self.event_log_dir / f"{session_id}.jsonl"
                    if self.event_log_dir is not None else None)
        session = LiveSession(
            session_id=session_id,
            catalogue=self.catalogue,
            settings=self.settings,
            session_config=session_config,
            backend=self.backend,
            synth=self.synth,
            wall_clock=True,
            event_log_path=log_path,
        )
        session.start()
        with self._lock:
            self.sessions[session_id] = session
        return session

    def get(self, session_id: str) -> LiveSession:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}") from None


def _product_summary(record) -> dict:
    return {"routing_id": record.routing_id, "name": record.name,
            "category": record.category.value}


def _product_detail(record) -> dict:
    return {
        "routing_id": record.routing_id,
        "name": record.name,
        "category": record.category.value,
        "ingredients": [{"name": i.name, "role": i.role} for i in record.ingredients],
        "texture": record.texture,
        "skin_types": list(record.skin_types),
        "usage": record.usage,
        "talking_points": list(record.talking_points),
        "disclaimer": record.disclaimer,
        "image_url": f"/images/{record.routing_id}",
    }


def create_dialogue_app(
    cfg: Optional[dict] = None,
    catalogue: Optional[Catalogue] = None,
    backend: Optional[GenerationBackend] = None,
    synth: Optional[Synthesizer] = None,
) -> FastAPI:
    """Dialogue gateway application.

    Without explicit arguments the packaged defaults apply: bundled catalogue,
    deterministic stub backend, in-process stub synthesizer.
    """
    cfg = cfg or default_config()
    service = cfg["service"]
    if catalogue is None:
        path = service.get("catalogue_path") or ""
        catalogue = load_catalogue(Path(path)) if path else load_default_catalogue()
    if backend is None:
        endpoint = service.get("backend_endpoint") or ""
        backend = (RemoteBackend(endpoint) if endpoint
                   else StubBackend(cfg, seed=int(service.get("stub_seed", 0))))
    if synth is None and service.get("media_endpoint"):
        synth = RemoteSynthClient(service["media_endpoint"])
    log_dir = Path(service["event_log_dir"]) if service.get("event_log_dir") else None

    manager = SessionManager(cfg, catalogue, backend, synth, event_log_dir=log_dir)

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        manager.start_ticker()
        yield
        manager.stop_ticker()

    app = FastAPI(title="livehost dialogue gateway", lifespan=lifespan)
    app.state.manager = manager

    @app.get("/health")
    def health():
        return {"status": "ok", "service": "dialogue-gateway",
                "sessions": len(manager.sessions)}

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        body = await request.json() if await _has_body(request) else {}
        try:
            session = manager.create(body.get("config"))
        except (ValueError, TypeError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {"session_id": session.session_id, "stage": session.snapshot()["stage"]}

    @app.get("/sessions/{session_id}")
    def session_snapshot(session_id: str):
        return manager.get(session_id).snapshot()

    @app.post("/sessions/{session_id}/comments")
    async def post_comment(session_id: str, request: Request):
        session = manager.get(session_id)
        body = await request.json()
        text = str(body.get("text", ""))
        author = str(body.get("author", "")) or "anonymous"
        if not text.strip():
            raise HTTPException(status_code=400, detail="comment text must be non-empty")
        comment_id = session.submit_comment(text, author)
        return {"comment_id": comment_id}

    @app.post("/sessions/{session_id}/ablation")
    async def set_ablation(session_id: str, request: Request):
        session = manager.get(session_id)
        body = await request.json()
        unknown = set(body) - {"tt_disabled", "pci_disabled", "rr_disabled"}
        if unknown:
            raise HTTPException(status_code=400, detail=f"unknown flags: {sorted(unknown)}")
        current = session.flags
        flags = AblationFlags(
            tt_disabled=bool(body.get("tt_disabled", current.tt_disabled)),
            pci_disabled=bool(body.get("pci_disabled", current.pci_disabled)),
            rr_disabled=bool(body.get("rr_disabled", current.rr_disabled)),
        )
        session.set_ablation(flags)
        return {"ablation": {"tt_disabled": flags.tt_disabled,
                             "pci_disabled": flags.pci_disabled,
                             "rr_disabled": flags.rr_disabled}}

    @app.get("/sessions/{session_id}/events")
    def stream_events(session_id: str, request: Request, from_seq: int = 0,
                      max_events: int = 0, idle_ms: int = 0):
        """Server-push event stream (SSE). Resumes after from_seq or the
        Last-Event-ID header; max_events/idle_ms bound the stream for
        polling clients and debugging (0 = unbounded)."""
        session = manager.get(session_id)
        last_event_id = request.headers.get("last-event-id")
        if last_event_id is not None:
            try:
                from_seq = int(last_event_id)
            except ValueError:
                pass
        return StreamingResponse(
            _sse_stream(session, from_seq, request, max_events, idle_ms),
            media_type="text/event-stream",
            headers={"Cache-Control": "no-cache", "X-Accel-Buffering": "no"},
        )

    @app.get("/products")
    def list_products():
        return {"products": [_product_summary(p) for p in catalogue.products]}

    @app.get("/products/{routing_id}")
    def product_detail(routing_id: int):
        try:
            record = catalogue.product(routing_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown product {routing_id}") from None
        return _product_detail(record)

    return app


async def _has_body(request: Request) -> bool:
    body = await request.body()
    return bool(body.strip())


async def _sse_stream(session: LiveSession, from_seq: int, request: Request,
                      max_events: int = 0, idle_ms: int = 0) -> AsyncIterator[str]:
    """Replay the backlog after from_seq, then follow live events.

    Async so client disconnects cancel the stream cleanly; the session event
    list is only snapshotted, never blocked on. max_events/idle_ms (0 = off)
    end the stream early for bounded readers.
    """
    cursor = max(from_seq, 0)
    sent = 0
    idle_polls = 0
    while True:
        events = session.events_since(cursor)
        if events:
            idle_polls = 0
            for ev in events:
                yield f"id: {ev.seq}\nevent: {ev.type}\ndata: {ev.to_json()}\n\n"
                cursor = ev.seq
                sent += 1
                if max_events and sent >= max_events:
                    return
            continue
        if await request.is_disconnected():
            return
        idle_polls += 1
        if idle_ms and idle_polls * SSE_POLL_S * 1000 >= idle_ms:
            return
        if idle_polls % 200 == 0:
            yield ": keepalive\n\n"
        await asyncio.sleep(SSE_POLL_S)


def create_media_app(
    cfg: Optional[dict] = None,
    synth: Optional[StubSynthesizer] = None,
    image_dir: Optional[Path] = None,
) -> FastAPI:
    """Media service application: synthesis, asset serving, product images."""
    cfg = cfg or default_config()
    synth = synth or StubSynthesizer(float(cfg["session"]["speaking_rate_cps"]))
    image_dir = image_dir or default_image_dir()
    app = FastAPI(title="livehost media service")
    app.state.synth = synth

    @app.get("/health")
    def health():
        return {"status": "ok", "service": "media"}

    @app.post("/synthesize")
    async def synthesize(request: Request):
        body = await request.json()
        text = str(body.get("text", ""))
        if not text.strip():
            raise HTTPException(status_code=400, detail="text must be non-empty")
        result = synth.synthesize(text)
        return {"asset_id": result.asset_id, "duration_ms": result.duration_ms,
                "text_hash": result.text_hash}

    @app.get("/assets/{asset_id}")
    def serve_asset(asset_id: str):
        try:
            payload, content_type = synth.asset(asset_id)
        except UnknownAssetError:
            raise HTTPException(status_code=404, detail=f"unknown asset {asset_id}") from None
        return Response(content=payload, media_type=content_type)

    @app.get("/images/{routing_id}")
    def serve_image(routing_id: int):
        try:
            payload = product_image(routing_id, image_dir)
        except UnknownAssetError:
            raise HTTPException(status_code=404,
                                detail=f"no image for product {routing_id}") from None
        return Response(content=payload, media_type="image/png")

    @app.exception_handler(ValueError)
    def value_error_handler(_request, exc):  # pragma: no cover - defensive
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    return app
