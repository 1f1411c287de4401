"""livehost: a virtual live-commerce host.

A dual-channel dialogue service arbitrates continuous scripted product
narration against preemptive, knowledge-grounded responses to viewer
comments; a separate media service handles synthesis and asset delivery.
Dataset-cleaning and evaluation tooling ship alongside.
"""

from .catalogue import (
    Catalogue,
    Category,
    CoverageWeights,
    Ingredient,
    PitchScript,
    ProductRecord,
    RetrievalResult,
    load_catalogue,
    load_default_catalogue,
    serialize_for_prompt,
)
from .dialogue import (
    AblationFlags,
    DiscourseStrategy,
    GenerationRequest,
    HostResponse,
    IntentLabel,
    SamplingParams,
    SchemaError,
    ViewerComment,
    assemble_prompt,
    classify_intent,
    parse_response,
    render_response,
    strategy_for,
    validate_claims,
)
from .rerank import Candidate, RecentHistory, RerankScore, RerankWeights, ngram_overlap, rerank
from .session import SessionConfig, SessionMachine, SessionStage

__version__ = "0.1.0"

__all__ = [
    "AblationFlags",
    "Candidate",
    "Catalogue",
    "Category",
    "CoverageWeights",
    "DiscourseStrategy",
    "GenerationRequest",
    "HostResponse",
    "Ingredient",
    "IntentLabel",
    "PitchScript",
    "ProductRecord",
    "RecentHistory",
    "RerankScore",
    "RerankWeights",
    "RetrievalResult",
    "SamplingParams",
    "SchemaError",
    "SessionConfig",
    "SessionMachine",
    "SessionStage",
    "ViewerComment",
    "assemble_prompt",
    "classify_intent",
    "load_catalogue",
    "load_default_catalogue",
    "ngram_overlap",
    "parse_response",
    "render_response",
    "rerank",
    "serialize_for_prompt",
    "strategy_for",
    "validate_claims",
]
