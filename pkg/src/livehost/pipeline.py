"""Comment-to-response pipeline shared by the live session loop and evalkit."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

from .backends import GenerationBackend, GenerationError, generate_candidates
from .catalogue import (
    Catalogue,
    CoverageWeights,
    RetrievalResult,
    serialize_for_prompt,
)
from .dialogue import (
    AblationFlags,
    ClaimLexicons,
    GenerationRequest,
    HostResponse,
    IntentLabel,
    IntentResult,
    SamplingParams,
    SchemaError,
    ViewerComment,
    Violation,
    assemble_prompt,
    classify_intent,
    intent_lexicons_from_config,
    parse_response,
    validate_claims,
)
from .rerank import (
    Candidate,
    RecentHistory,
    RerankScore,
    RerankWeights,
    ScoreContext,
    fallback_response,
    rerank,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineSettings:
    """Config-derived knobs bundled so every caller drives the same path."""

    persona_prompt: str
    sampling: SamplingParams
    rerank_weights: RerankWeights
    claim_lexicons: ClaimLexicons
    retrieval_threshold: float
    coverage_weights: CoverageWeights
    intent_lexicons: dict[IntentLabel, tuple[str, ...]]
    raw_config: dict = field(repr=False, default_factory=dict)

    @classmethod
    def from_config(cls, cfg: dict) -> "PipelineSettings":
        sampling = cfg["sampling"]
        retrieval = cfg["retrieval"]
        return cls(
            persona_prompt=cfg["persona_prompt"],
            sampling=SamplingParams(
                temperature=float(sampling["temperature"]),
                top_p=float(sampling["top_p"]),
                repetition_penalty=float(sampling["repetition_penalty"]),
                candidates=int(sampling["candidates"]),
            ),
            rerank_weights=RerankWeights.from_config(cfg),
            claim_lexicons=ClaimLexicons.from_config(cfg),
            retrieval_threshold=float(retrieval["threshold"]),
            coverage_weights=CoverageWeights(
                name=float(retrieval["name_weight"]),
                category=float(retrieval["category_weight"]),
                ingredient=float(retrieval["ingredient_weight"]),
            ),
            intent_lexicons=intent_lexicons_from_config(cfg),
            raw_config=cfg,
        )


@dataclass
class PipelineResult:
    comment: ViewerComment
    intent: IntentResult
    retrieval: Optional[RetrievalResult]
    prompt: str
    raw_candidates: list[str]
    candidates: list[Candidate]
    winner: Optional[Candidate]
    response: HostResponse
    scores: list[RerankScore]
    violations: list[Violation]
    used_fallback: bool

    @property
    def selected_index(self) -> Optional[int]:
        return self.winner.index if self.winner is not None else None


def respond(
    comment: ViewerComment,
    catalogue: Catalogue,
    settings: PipelineSettings,
    backend: GenerationBackend,
    flags: AblationFlags = AblationFlags(),
    history: Optional[RecentHistory] = None,
    intent_backend: Optional[Callable[[str], str]] = None,
) -> PipelineResult:
    """Run the full interactive-channel pipeline for one comment.

    Backend failure or a fully unparseable batch degrades to the templated
    safe fallback built from the active product's talking points; the
    pipeline never returns silence.
    """
    history = history if history is not None else RecentHistory()
    intent = classify_intent(comment, intent_backend, settings.intent_lexicons)
    retrieval = catalogue.retrieve(
        comment.text, threshold=settings.retrieval_threshold, weights=settings.coverage_weights
    )
    active = retrieval.record if retrieval is not None else None
    context = serialize_for_prompt(active, catalogue.glossary) if active is not None else None
    req = GenerationRequest(
        system_prompt=settings.persona_prompt,
        intent=intent.label,
        comment=comment,
        product_context=context,
        sampling=settings.sampling,
        ablation=flags,
    )
    prompt = assemble_prompt(req)
    try:
        raws = generate_candidates(req, backend)
    except GenerationError as exc:
        logger.warning("generation failed (%s); %d partial candidates", exc, len(exc.partial))
        raws = exc.partial

    candidates: list[Candidate] = []
    for i, raw in enumerate(raws):
        try:
            candidates.append(Candidate(response=parse_response(raw), raw=raw, index=i))
        except SchemaError as exc:
            logger.debug("candidate %d rejected: %s", i, exc)

    ctx = ScoreContext(comment=comment, active=active, history=history,
                       catalogue=catalogue, lexicons=settings.claim_lexicons)
    if candidates:
        winner, scores = rerank(candidates, ctx, settings.rerank_weights,
                                rr_disabled=flags.rr_disabled)
        response = winner.response
        used_fallback = False
    else:
        winner, scores = None, []
        response = fallback_response(active, settings.raw_config)
        used_fallback = True

    violations = validate_claims(response, active, catalogue, settings.claim_lexicons)
    return PipelineResult(
        comment=comment,
        intent=intent,
        retrieval=retrieval,
        prompt=prompt,
        raw_candidates=raws,
        candidates=candidates,
        winner=winner,
        response=response,
        scores=scores,
        violations=violations,
        used_fallback=used_fallback,
    )
