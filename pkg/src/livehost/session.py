"""Five-stage session state machine arbitrating the shared audio resource.

The idle channel cycles pitch scripts sentence by sentence; a viewer comment
preemptively interrupts, the interactive channel holds the audio lease through
response delivery and a hold period, then narration resumes from the saved
sentence boundary. The machine is driven purely by injected timestamps
(``tick``), so every schedule is replayable; wall-clock driving lives in the
services layer.

One serialized event loop owns each machine instance; methods return the
events they emitted, in order.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from .catalogue import Catalogue
from .dialogue import AblationFlags, HostResponse, ViewerComment
from .media import StubSynthesizer, Synthesizer


class SessionError(RuntimeError):
    pass


class SessionStage(str, Enum):
    INIT = "init"
    IDLE_NARRATION = "idle_narration"
    INTERRUPTED = "interrupted"
    RESPONDING = "responding"
    HOLD = "hold"


class LeaseHolder(str, Enum):
    NONE = "none"
    IDLE_CHANNEL = "idle_channel"
    INTERACTIVE_CHANNEL = "interactive_channel"


LEGAL_EDGES = frozenset({
    (SessionStage.INIT, SessionStage.IDLE_NARRATION),
    (SessionStage.IDLE_NARRATION, SessionStage.INTERRUPTED),
    (SessionStage.INTERRUPTED, SessionStage.RESPONDING),
    (SessionStage.RESPONDING, SessionStage.HOLD),
    (SessionStage.HOLD, SessionStage.IDLE_NARRATION),
    (SessionStage.HOLD, SessionStage.INTERRUPTED),
})


@dataclass
class AudioLease:
    holder: LeaseHolder = LeaseHolder.NONE
    acquired_at: int = 0
    expires_at: Optional[int] = None


@dataclass(frozen=True)
class ResumePointer:
    script_index: int
    sentence_index: int


@dataclass(frozen=True)
class SessionConfig:
    hold_period_ms: int = 2000
    comment_queue_capacity: int = 8
    ablation: AblationFlags = field(default_factory=AblationFlags)
    speaking_rate_cps: float = 4.0

    def validate(self) -> None:
        if self.hold_period_ms < 0:
            raise ValueError("hold_period_ms must be >= 0")
        if self.comment_queue_capacity < 1:
            raise ValueError("comment_queue_capacity must be >= 1")
        if self.speaking_rate_cps <= 0:
            raise ValueError("speaking_rate_cps must be positive")


# --- events ----------------------------------------------------------------


@dataclass(frozen=True)
class StageChange:
    from_stage: SessionStage
    to_stage: SessionStage
    at: int


@dataclass(frozen=True)
class NarrationSegment:
    text: str
    script_index: int
    sentence_index: int
    duration_ms: int
    asset_id: Optional[str]
    at: int


@dataclass(frozen=True)
class ResponseDelivery:
    response: HostResponse
    comment_id: str
    duration_ms: int
    asset_id: Optional[str]
    at: int


@dataclass(frozen=True)
class ProductFocus:
    routing_id: int
    product_name: str
    at: int


@dataclass(frozen=True)
class CommentReceived:
    comment_id: str
    text: str
    author: str
    at: int


@dataclass(frozen=True)
class CommentDropped:
    comment_id: str
    at: int


SessionEvent = Union[StageChange, NarrationSegment, ResponseDelivery,
                     ProductFocus, CommentReceived, CommentDropped]

EVENT_TYPES = {
    StageChange: "stage_change",
    NarrationSegment: "narration_segment",
    ResponseDelivery: "response_delivery",
    ProductFocus: "product_focus",
    CommentReceived: "comment_received",
    CommentDropped: "comment_dropped",
}


class SessionMachine:
    """Pure state machine: one audio lease, five stages, injected clock."""

    def __init__(self, config: SessionConfig, catalogue: Catalogue,
                 synth: Optional[Synthesizer] = None):
        config.validate()
        self.config = config
        self.catalogue = catalogue
        self.synth = synth or StubSynthesizer(config.speaking_rate_cps)
        self.stage = SessionStage.INIT
        self.lease = AudioLease()
        self.clock = 0
        self.playing: Optional[ResumePointer] = None
        self.resume_pointer = ResumePointer(0, 0)
        self.queue: deque[ViewerComment] = deque()
        self.pending_comment: Optional[ViewerComment] = None
        self._segment_end: Optional[int] = None
        self._response_end: Optional[int] = None
        self._hold_deadline: Optional[int] = None
        self._focus_routing: Optional[int] = None

    # -- helpers --

    def _transition(self, to_stage: SessionStage, events: list[SessionEvent]) -> None:
        edge = (self.stage, to_stage)
        if edge not in LEGAL_EDGES:
            raise SessionError(f"illegal stage transition {edge[0].value} -> {edge[1].value}")
        events.append(StageChange(from_stage=self.stage, to_stage=to_stage, at=self.clock))
        self.stage = to_stage

    def _advance(self, ptr: ResumePointer) -> ResumePointer:
        script = self.catalogue.scripts[ptr.script_index]
        if ptr.sentence_index + 1 < len(script.sentences):
            return ResumePointer(ptr.script_index, ptr.sentence_index + 1)
        return ResumePointer((ptr.script_index + 1) % len(self.catalogue.scripts), 0)

    def _begin_segment(self, ptr: ResumePointer, events: list[SessionEvent]) -> None:
        script = self.catalogue.scripts[ptr.script_index]
        text = script.sentences[ptr.sentence_index]
        synth = self.synth.synthesize(text)
        self.playing = ptr
        self._segment_end = self.clock + synth.duration_ms
        events.append(NarrationSegment(
            text=text,
            script_index=ptr.script_index,
            sentence_index=ptr.sentence_index,
            duration_ms=synth.duration_ms,
            asset_id=synth.asset_id,
            at=self.clock,
        ))
        if script.routing_id != self._focus_routing:
            self._focus_routing = script.routing_id
            product = self.catalogue.product(script.routing_id)
            events.append(ProductFocus(routing_id=product.routing_id,
                                       product_name=product.name, at=self.clock))

    # -- operations --

    def start(self, now: int = 0) -> list[SessionEvent]:
        """Init -> IdleNarration with narration at script 0, sentence 0.

        The Init->IdleNarration flip happens before the event log opens, so
        the first logged event is the first narration segment.
        """
        if self.stage is not SessionStage.INIT:
            raise SessionError("session already started")
        if not self.catalogue.scripts:
            raise SessionError("pitch script corpus is empty")
        self.clock = now
        self.stage = SessionStage.IDLE_NARRATION
        self.lease = AudioLease(holder=LeaseHolder.IDLE_CHANNEL, acquired_at=now)
        events: list[SessionEvent] = []
        self._begin_segment(ResumePointer(0, 0), events)
        return events

    def on_comment(self, comment: ViewerComment) -> list[SessionEvent]:
        """Preemptive interrupt in IdleNarration; FIFO queueing otherwise."""
        if self.stage is SessionStage.INIT:
            raise SessionError("session not started")
        events: list[SessionEvent] = [CommentReceived(
            comment_id=comment.comment_id, text=comment.text,
            author=comment.author, at=self.clock,
        )]
        if self.stage is SessionStage.IDLE_NARRATION:
            # Abandon the playing sentence; resume at the next boundary.
            assert self.playing is not None
            self.resume_pointer = self._advance(self.playing)
            self.playing = None
            self._segment_end = None
            self.lease = AudioLease(holder=LeaseHolder.INTERACTIVE_CHANNEL,
                                    acquired_at=self.clock)
            self._transition(SessionStage.INTERRUPTED, events)
            self.pending_comment = comment
        else:
            self.queue.append(comment)
            if len(self.queue) > self.config.comment_queue_capacity:
                dropped = self.queue.popleft()
                events.append(CommentDropped(comment_id=dropped.comment_id, at=self.clock))
        return events

    def take_pending_comment(self) -> Optional[ViewerComment]:
        """Hand the comment awaiting generation to the driving loop."""
        comment, self.pending_comment = self.pending_comment, None
        return comment

    def note_focus(self, routing_id: int) -> list[SessionEvent]:
        """Record a retrieval-driven product focus (display concern only)."""
        if routing_id == self._focus_routing:
            return []
        product = self.catalogue.product(routing_id)
        self._focus_routing = routing_id
        return [ProductFocus(routing_id=routing_id, product_name=product.name, at=self.clock)]

    def on_response_ready(self, response: HostResponse, comment_id: str) -> list[SessionEvent]:
        if self.stage is not SessionStage.INTERRUPTED:
            raise SessionError(f"on_response_ready in stage {self.stage.value}")
        synth = self.synth.synthesize(response.spoken)
        events: list[SessionEvent] = []
        self._transition(SessionStage.RESPONDING, events)
        self._response_end = self.clock + synth.duration_ms
        events.append(ResponseDelivery(
            response=response,
            comment_id=comment_id,
            duration_ms=synth.duration_ms,
            asset_id=synth.asset_id,
            at=self.clock,
        ))
        return events

    def on_playback_complete(self) -> list[SessionEvent]:
        if self.stage is not SessionStage.RESPONDING:
            raise SessionError(f"on_playback_complete in stage {self.stage.value}")
        events: list[SessionEvent] = []
        self._response_end = None
        self._hold_deadline = self.clock + self.config.hold_period_ms
        self.lease.expires_at = self._hold_deadline
        self._transition(SessionStage.HOLD, events)
        return events

    def on_hold_expired(self) -> list[SessionEvent]:
        if self.stage is not SessionStage.HOLD:
            raise SessionError(f"on_hold_expired in stage {self.stage.value}")
        events: list[SessionEvent] = []
        self._hold_deadline = None
        if self.queue:
            self.pending_comment = self.queue.popleft()
            self.lease = AudioLease(holder=LeaseHolder.INTERACTIVE_CHANNEL,
                                    acquired_at=self.clock)
            self._transition(SessionStage.INTERRUPTED, events)
        else:
            self.lease = AudioLease(holder=LeaseHolder.IDLE_CHANNEL, acquired_at=self.clock)
            self._transition(SessionStage.IDLE_NARRATION, events)
            self._begin_segment(self.resume_pointer, events)
        return events

    def tick(self, now: int) -> list[SessionEvent]:
        """Fire every playback/hold transition due at or before ``now``.

        Events are stamped with their scheduled boundary times, so ticking
        sparsely or densely produces the same log. Idempotent for an
        unchanged ``now``.
        """
        events: list[SessionEvent] = []
        if now < self.clock:
            return events
        while True:
            if (self.stage is SessionStage.IDLE_NARRATION
                    and self._segment_end is not None and self._segment_end <= now):
                self.clock = self._segment_end
                assert self.playing is not None
                self._begin_segment(self._advance(self.playing), events)
            elif (self.stage is SessionStage.RESPONDING
                    and self._response_end is not None and self._response_end <= now):
                self.clock = self._response_end
                events.extend(self.on_playback_complete())
            elif (self.stage is SessionStage.HOLD
                    and self._hold_deadline is not None and self._hold_deadline <= now):
                self.clock = self._hold_deadline
                events.extend(self.on_hold_expired())
            else:
                break
        self.clock = now
        return events
