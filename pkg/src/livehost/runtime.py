"""Live session runtime.

Wraps the pure state machine with the generation pipeline, the recent-response
ring, sequence-numbered wire events and an optional append-only event log.
All mutation happens under one lock per session (the serialized event loop),
so per-session ordering is guaranteed while many sessions run concurrently.
"""
from __future__ import annotations

import json
import threading
import time
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

from .backends import GenerationBackend
from .catalogue import Catalogue
from .dialogue import AblationFlags, ViewerComment
from .media import Synthesizer
from .pipeline import PipelineSettings, respond
from .rerank import RecentHistory
from .session import (
    EVENT_TYPES,
    CommentDropped,
    CommentReceived,
    NarrationSegment,
    ProductFocus,
    ResponseDelivery,
    SessionConfig,
    SessionEvent,
    SessionMachine,
    StageChange,
)


@dataclass(frozen=True)
class ApiEvent:
    """Wire rendering of a session event: strictly increasing seq per session."""

    seq: int
    server_ts: int
    at: int
    type: str
    data: dict

    def to_json(self) -> str:
        payload = {"seq": self.seq, "server_ts": self.server_ts, "at": self.at,
                   "type": self.type, "data": self.data}
        return json.dumps(payload, ensure_ascii=False, separators=(",", ":"))


def event_to_wire(ev: SessionEvent) -> tuple[str, dict]:
    if isinstance(ev, StageChange):
        data = {"from": ev.from_stage.value, "to": ev.to_stage.value}
    elif isinstance(ev, NarrationSegment):
        data = {"text": ev.text, "script_index": ev.script_index,
                "sentence_index": ev.sentence_index, "duration_ms": ev.duration_ms,
                "asset_id": ev.asset_id}
    elif isinstance(ev, ResponseDelivery):
        data = {"response": {"spoken": ev.response.spoken, "slogan": ev.response.slogan,
                             "hook_question": ev.response.hook_question, "cta": ev.response.cta},
                "comment_id": ev.comment_id, "duration_ms": ev.duration_ms,
                "asset_id": ev.asset_id}
    elif isinstance(ev, ProductFocus):
        data = {"routing_id": ev.routing_id, "product_name": ev.product_name}
    elif isinstance(ev, CommentReceived):
        data = {"comment_id": ev.comment_id, "text": ev.text, "author": ev.author}
    elif isinstance(ev, CommentDropped):
        data = {"comment_id": ev.comment_id}
    else:  # pragma: no cover - new event types must be mapped explicitly
        raise TypeError(f"unmapped event type {type(ev).__name__}")
    return EVENT_TYPES[type(ev)], data


def pseudonymize(author: str) -> str:
    """Stable pseudonym; raw platform handles never reach the wire."""
    return f"viewer-{zlib.crc32(author.encode('utf-8')) & 0xFFFF:04x}"


def wall_ms() -> int:
    return time.monotonic_ns() // 1_000_000


class LiveSession:
    """One session: machine + pipeline behind a serialized loop.

    In wall-clock mode timestamps come from the monotonic clock; in simulated
    mode every call takes an explicit ``now`` and server timestamps equal the
    machine clock, which makes full runs byte-replayable.
    """

    def __init__(
        self,
        session_id: str,
        catalogue: Catalogue,
        settings: PipelineSettings,
        session_config: SessionConfig,
        backend: GenerationBackend,
        synth: Optional[Synthesizer] = None,
        wall_clock: bool = False,
        event_log_path: Optional[Path] = None,
        intent_backend: Optional[Callable[[str], str]] = None,
    ):
        self.session_id = session_id
        self.catalogue = catalogue
        self.settings = settings
        self.backend = backend
        self.intent_backend = intent_backend
        self.wall_clock = wall_clock
        self.flags = session_config.ablation
        self._machine = SessionMachine(session_config, catalogue, synth)
        self._history = RecentHistory()
        self._events: list[ApiEvent] = []
        self._lock = threading.RLock()
        self._comment_counter = 0
        self._log_handle = None
        if event_log_path is not None:
            event_log_path.parent.mkdir(parents=True, exist_ok=True)
            self._log_handle = open(event_log_path, "a", encoding="utf-8")

    # -- internals ----------------------------------------------------------

    def _resolve_now(self, now: Optional[int]) -> int:
        if now is not None:
            return now
        if self.wall_clock:
            return wall_ms()
        return self._machine.clock

    def _record(self, events: list[SessionEvent]) -> None:
        for ev in events:
            kind, data = event_to_wire(ev)
            seq = len(self._events) + 1
            server_ts = wall_ms() if self.wall_clock else ev.at
            api = ApiEvent(seq=seq, server_ts=server_ts, at=ev.at, type=kind, data=data)
            self._events.append(api)
            if self._log_handle is not None:
                self._log_handle.write(api.to_json() + "\n")
                self._log_handle.flush()

    def _drive_pipeline(self) -> None:
        comment = self._machine.take_pending_comment()
        if comment is None:
            return
        result = respond(
            comment,
            self.catalogue,
            self.settings,
            self.backend,
            flags=self.flags,
            history=self._history,
            intent_backend=self.intent_backend,
        )
        if result.retrieval is not None:
            self._record(self._machine.note_focus(result.retrieval.record.routing_id))
        self._record(self._machine.on_response_ready(result.response, comment.comment_id))
        self._history.add(result.response.spoken)

    # -- public API ----------------------------------------------------------

    def start(self, now: Optional[int] = None) -> None:
        with self._lock:
            self._record(self._machine.start(self._resolve_now(now)))

    def submit_comment(self, text: str, author: str, now: Optional[int] = None) -> str:
        """Deliver a comment to the session loop; returns its comment id."""
        with self._lock:
            ts = self._resolve_now(now)
            self._record(self._machine.tick(ts))
            self._comment_counter += 1
            comment = ViewerComment(
                comment_id=f"c{self._comment_counter:05d}",
                text=text,
                author=pseudonymize(author),
                arrival_time=ts,
            )
            self._record(self._machine.on_comment(comment))
            self._drive_pipeline()
            return comment.comment_id

    def tick(self, now: Optional[int] = None) -> None:
        with self._lock:
            self._record(self._machine.tick(self._resolve_now(now)))
            self._drive_pipeline()

    def set_ablation(self, flags: AblationFlags) -> AblationFlags:
        with self._lock:
            self.flags = flags
            return self.flags

    def events_since(self, after_seq: int = 0) -> list[ApiEvent]:
        with self._lock:
            return list(self._events[max(after_seq, 0):])

    def last_seq(self) -> int:
        with self._lock:
            return len(self._events)

    def snapshot(self) -> dict:
        with self._lock:
            machine = self._machine
            focus = None
            if machine._focus_routing is not None:
                product = self.catalogue.product(machine._focus_routing)
                focus = {"routing_id": product.routing_id, "product_name": product.name}
            return {
                "session_id": self.session_id,
                "stage": machine.stage.value,
                "lease_holder": machine.lease.holder.value,
                "clock": machine.clock,
                "queue_length": len(machine.queue),
                "last_seq": len(self._events),
                "focus": focus,
                "ablation": {
                    "tt_disabled": self.flags.tt_disabled,
                    "pci_disabled": self.flags.pci_disabled,
                    "rr_disabled": self.flags.rr_disabled,
                },
            }

    def close(self) -> None:
        with self._lock:
            if self._log_handle is not None:
                self._log_handle.close()
                self._log_handle = None
