"""Penalty-based candidate reranking.

Character 3-grams everywhere (overlap with recent responses, internal
repetition) keep the scoring tokenizer-free for Chinese text. All functions
are pure; RecentHistory is owned by the session loop.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

from .catalogue import Catalogue, ProductRecord, normalize_text
from .dialogue import ClaimLexicons, HostResponse, ViewerComment, validate_claims

HISTORY_CAPACITY = 5


@dataclass(frozen=True)
class Candidate:
    response: HostResponse
    raw: str
    index: int


@dataclass(frozen=True)
class RerankScore:
    relevance: float
    misalignment_penalty: float
    unsanctioned_penalty: float
    repetition_penalty: float
    formulaic_penalty: float
    overlap_penalty: float
    total: float


@dataclass(frozen=True)
class RerankWeights:
    relevance: float = 1.0
    misalignment: float = 2.0
    unsanctioned: float = 3.0
    repetition: float = 1.0
    formulaic: float = 0.5
    overlap: float = 1.0
    safety_gate: bool = True
    ngram: int = 3
    stock_openings: tuple[str, ...] = ()

    @classmethod
    def from_config(cls, cfg: dict) -> "RerankWeights":
        block = cfg["rerank"]
        w = block["weights"]
        return cls(
            relevance=float(w["relevance"]),
            misalignment=float(w["misalignment"]),
            unsanctioned=float(w["unsanctioned"]),
            repetition=float(w["repetition"]),
            formulaic=float(w["formulaic"]),
            overlap=float(w["overlap"]),
            safety_gate=bool(block.get("safety_gate", True)),
            ngram=int(block.get("ngram", 3)),
            stock_openings=tuple(block.get("stock_openings", ())),
        )


class RecentHistory:
    """FIFO ring of the five most recent selected spoken texts."""

    def __init__(self, capacity: int = HISTORY_CAPACITY):
        self._ring: deque[str] = deque(maxlen=capacity)

    def add(self, spoken: str) -> None:
        self._ring.append(spoken)

    def texts(self) -> tuple[str, ...]:
        return tuple(self._ring)

    def __len__(self) -> int:
        return len(self._ring)


def char_ngrams(text: str, n: int) -> set[str]:
    if n < 1:
        raise ValueError("n must be >= 1")
    return {text[i:i + n] for i in range(len(text) - n + 1)}


def ngram_overlap(candidate_text: str, history: RecentHistory, n: int = 3) -> float:
    """Fraction of the candidate's n-grams already present in recent history.

    0.0 for empty history or texts shorter than n; 1.0 when every candidate
    gram already occurred.
    """
    grams = char_ngrams(candidate_text, n)
    if not grams or not len(history):
        return 0.0
    seen: set[str] = set()
    for text in history.texts():
        seen |= char_ngrams(text, n)
    if not seen:
        return 0.0
    return len(grams & seen) / len(grams)


def internal_repetition(text: str, n: int = 3) -> float:
    """Share of n-gram occurrences that repeat an earlier occurrence."""
    total = len(text) - n + 1
    if total <= 0:
        return 0.0
    unique = len(char_ngrams(text, n))
    return 1.0 - unique / total


@dataclass
class ScoreContext:
    comment: ViewerComment
    active: Optional[ProductRecord]
    history: RecentHistory
    catalogue: Catalogue
    lexicons: ClaimLexicons


def _active_keywords(active: ProductRecord) -> list[str]:
    return [normalize_text(active.name)] + [normalize_text(i.name) for i in active.ingredients]


def _relevance(spoken: str, ctx: ScoreContext) -> float:
    """Coverage-style keyword match between the spoken text and the union of
    comment-derived category keywords and active-product keywords."""
    comment_text = normalize_text(ctx.comment.text)
    anchors: list[str] = []
    for words in ctx.catalogue.keyword_table.values():
        anchors.extend(normalize_text(w) for w in words if normalize_text(w) in comment_text)
    if ctx.active is not None:
        anchors.extend(_active_keywords(ctx.active))
    anchors = list(dict.fromkeys(anchors))
    if not anchors:
        return 0.0
    text = normalize_text(spoken)
    return sum(1 for a in anchors if a in text) / len(anchors)


def score(candidate: Candidate, ctx: ScoreContext, weights: RerankWeights) -> RerankScore:
    """Score one parsed candidate; all components are >= 0."""
    spoken = candidate.response.spoken
    relevance = _relevance(spoken, ctx)
    misalignment = 0.0
    if ctx.active is not None:
        named = any(kw in normalize_text(spoken) for kw in _active_keywords(ctx.active))
        misalignment = 0.0 if named else 1.0
    violations = validate_claims(candidate.response, ctx.active, ctx.catalogue, ctx.lexicons)
    unsanctioned = float(sum(1 for v in violations if v.kind == "unsanctioned_mention"))
    repetition = internal_repetition(spoken, weights.ngram)
    formulaic = 1.0 if any(spoken.startswith(p) for p in weights.stock_openings) else 0.0
    overlap = ngram_overlap(spoken, ctx.history, weights.ngram)
    total = (weights.relevance * relevance
             - weights.misalignment * misalignment
             - weights.unsanctioned * unsanctioned
             - weights.repetition * repetition
             - weights.formulaic * formulaic
             - weights.overlap * overlap)
    return RerankScore(
        relevance=relevance,
        misalignment_penalty=misalignment,
        unsanctioned_penalty=unsanctioned,
        repetition_penalty=repetition,
        formulaic_penalty=formulaic,
        overlap_penalty=overlap,
        total=total,
    )


def rerank(
    batch: list[Candidate],
    ctx: ScoreContext,
    weights: RerankWeights,
    rr_disabled: bool = False,
) -> tuple[Candidate, list[RerankScore]]:
    """Pick the winner from a non-empty batch of parsed candidates.

    Normal mode prefers the candidate with the maximal total, ties broken by
    the lowest generation index. The safety gate restricts the choice to
    zero-unsanctioned candidates whenever at least one exists. With
    rr_disabled the lowest-index candidate wins outright; scores are still
    computed for logging.
    """
    if not batch:
        raise ValueError("rerank requires a non-empty batch")
    scores = [score(c, ctx, weights) for c in batch]
    if rr_disabled:
        winner = min(batch, key=lambda c: c.index)
        return winner, scores
    pairs = list(zip(batch, scores))
    if weights.safety_gate:
        clean = [(c, s) for c, s in pairs if s.unsanctioned_penalty == 0]
        if clean:
            pairs = clean
    winner, _ = max(pairs, key=lambda cs: (cs[1].total, -cs[0].index))
    return winner, scores


def fallback_response(active: Optional[ProductRecord], cfg: dict) -> HostResponse:
    """Templated safe response used when every generated candidate fails to
    parse: catalogue talking points only, never silence."""
    stub = cfg["stub_backend"]
    if active is not None and active.talking_points:
        spoken = active.talking_points[0]
        pool = stub["slogans"].get(active.category.value) or stub["slogans"]["generic"]
    else:
        spoken = stub["no_product_spoken"][0]
        pool = stub["slogans"]["generic"]
    return HostResponse(
        spoken=spoken,
        slogan=pool[0],
        hook_question=stub["hooks"][0],
        cta=stub["ctas"][0],
    )
