"""Intent-conditioned dialogue core.

Covers the comment-to-prompt half of the pipeline (intent rules, discourse
strategy, prompt assembly) and the fixed four-field response schema with its
whitelist-based claim validation. Everything here is stateless and safe for
concurrent use.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from .catalogue import Catalogue, ProductRecord, normalize_text

logger = logging.getLogger(__name__)

INTENT_TAG = "[INTENT]"
PRODUCT_OPEN = "[PRODUCT]"
PRODUCT_CLOSE = "[/PRODUCT]"
COMMENT_TAG = "[COMMENT]"

SENTENCE_TERMINATORS = "。！？!?."
_SENTENCE_SPLIT_RE = re.compile(f"[{re.escape(SENTENCE_TERMINATORS)}]+")
_QUESTION_ENDINGS = ("？", "?")

FIELD_LABELS = ("SPOKEN", "SLOGAN", "HOOK", "CTA")


class IntentLabel(str, Enum):
    INQUIRY = "inquiry"
    SCEPTICISM = "scepticism"
    APPRECIATION = "appreciation"
    ANTAGONISM = "antagonism"


class DiscourseStrategy(str, Enum):
    AUTHORITATIVE_GUIDANCE = "authoritative_guidance"
    SOCIAL_PROOF_AMPLIFICATION = "social_proof_amplification"
    EMPATHETIC_REBUTTAL = "empathetic_rebuttal"
    HUMOR_DEFLECTION = "humor_deflection"


_STRATEGY_FOR = {
    IntentLabel.INQUIRY: DiscourseStrategy.AUTHORITATIVE_GUIDANCE,
    IntentLabel.APPRECIATION: DiscourseStrategy.SOCIAL_PROOF_AMPLIFICATION,
    IntentLabel.SCEPTICISM: DiscourseStrategy.EMPATHETIC_REBUTTAL,
    IntentLabel.ANTAGONISM: DiscourseStrategy.HUMOR_DEFLECTION,
}
_INTENT_FOR = {v: k for k, v in _STRATEGY_FOR.items()}

# Multi-hit resolution order; zero hits default to INQUIRY.
_PRIORITY = (IntentLabel.ANTAGONISM, IntentLabel.SCEPTICISM,
             IntentLabel.INQUIRY, IntentLabel.APPRECIATION)


def strategy_for(intent: IntentLabel) -> DiscourseStrategy:
    return _STRATEGY_FOR[intent]


def intent_for_strategy(strategy: DiscourseStrategy) -> IntentLabel:
    return _INTENT_FOR[strategy]


@dataclass(frozen=True)
class ViewerComment:
    comment_id: str
    text: str
    author: str
    arrival_time: int = 0

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("comment text must be non-empty after trimming")


@dataclass(frozen=True)
class IntentResult:
    """Classification outcome; degraded=True means the backend failed and the
    rule lexicons answered instead."""

    label: IntentLabel
    degraded: bool = False
    source: str = "rules"


def classify_intent(
    comment: ViewerComment,
    backend: Optional[Callable[[str], str]] = None,
    lexicons: Optional[dict[IntentLabel, tuple[str, ...]]] = None,
) -> IntentResult:
    """Classify a comment's intent.

    With a backend, its answer wins; on backend failure the rule-based
    lexicons take over and the result is flagged degraded. Rule mode is total
    and deterministic: cue-lexicon hits resolved by fixed priority
    (antagonism > scepticism > inquiry > appreciation), defaulting to inquiry.
    """
    degraded = False
    if backend is not None:
        try:
            return IntentResult(label=IntentLabel(backend(comment.text)), source="backend")
        except Exception as exc:
            logger.warning("intent backend failed (%s); falling back to rules", exc)
            degraded = True
    lex = lexicons if lexicons is not None else default_intent_lexicons()
    text = normalize_text(comment.text)
    hits = {label for label, cues in lex.items() if any(normalize_text(c) in text for c in cues)}
    for label in _PRIORITY:
        if label in hits:
            return IntentResult(label=label, degraded=degraded)
    return IntentResult(label=IntentLabel.INQUIRY, degraded=degraded)


_default_lexicons: Optional[dict[IntentLabel, tuple[str, ...]]] = None


def default_intent_lexicons() -> dict[IntentLabel, tuple[str, ...]]:
    global _default_lexicons
    if _default_lexicons is None:
        from .config import default_config

        _default_lexicons = intent_lexicons_from_config(default_config())
    return _default_lexicons


def intent_lexicons_from_config(cfg: dict) -> dict[IntentLabel, tuple[str, ...]]:
    raw = cfg["intent_lexicons"]
    return {IntentLabel(k): tuple(v) for k, v in raw.items()}


# ---------------------------------------------------------------------------
# Generation request and prompt assembly


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 0.9
    top_p: float = 0.92
    repetition_penalty: float = 1.12
    candidates: int = 6

    def __post_init__(self):
        if self.candidates < 1:
            raise ValueError("candidates must be >= 1")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")


@dataclass(frozen=True)
class AblationFlags:
    tt_disabled: bool = False
    pci_disabled: bool = False
    rr_disabled: bool = False


@dataclass(frozen=True)
class GenerationRequest:
    system_prompt: str
    intent: IntentLabel
    comment: ViewerComment
    product_context: Optional[str] = None
    sampling: SamplingParams = field(default_factory=SamplingParams)
    ablation: AblationFlags = field(default_factory=AblationFlags)


def assemble_prompt(req: GenerationRequest) -> str:
    """Persona prompt + intent tag + optional product block + comment.

    The intent tag line disappears under the tt_disabled ablation, the product
    block under pci_disabled; everything else is byte-identical.
    """
    parts = [req.system_prompt]
    if not req.ablation.tt_disabled:
        parts.append(f"{INTENT_TAG} {req.intent.value} -> {strategy_for(req.intent).value}")
    if req.product_context and not req.ablation.pci_disabled:
        parts.append(f"{PRODUCT_OPEN}\n{req.product_context}\n{PRODUCT_CLOSE}")
    parts.append(f"{COMMENT_TAG} {req.comment.text}")
    return "\n".join(parts)


# ---------------------------------------------------------------------------
# Four-field response schema


class SchemaError(ValueError):
    """Schema violation; carries the first offending field and rule."""

    def __init__(self, field_name: str, rule: str, message: str):
        super().__init__(f"{field_name}: {rule}: {message}")
        self.field_name = field_name
        self.rule = rule


@dataclass(frozen=True)
class HostResponse:
    spoken: str
    slogan: str
    hook_question: str
    cta: str


def count_sentences(text: str) -> int:
    """Sentence count under the boundary rule: terminators 。！？!?. collapse
    when consecutive, and a trailing unterminated fragment counts as one."""
    return sum(1 for part in _SENTENCE_SPLIT_RE.split(text) if part.strip())


def validate_host_response(resp: HostResponse) -> None:
    """Raise SchemaError naming the first violated field and rule."""
    for name, value in (("spoken", resp.spoken), ("slogan", resp.slogan),
                        ("hook_question", resp.hook_question), ("cta", resp.cta)):
        if "\n" in value:
            raise SchemaError(name, "single_line", "field must not contain line breaks")
    n = count_sentences(resp.spoken)
    if n not in (1, 2):
        raise SchemaError("spoken", "sentence_count", f"{n} sentences, limit is 2")
    length = len(resp.slogan.strip())
    if not 8 <= length <= 12:
        raise SchemaError("slogan", "slogan_length", f"{length} characters, allowed 8-12")
    hook = resp.hook_question.strip()
    if not hook:
        raise SchemaError("hook_question", "empty_hook", "hook question must be non-empty")
    if not hook.endswith(_QUESTION_ENDINGS):
        raise SchemaError("hook_question", "hook_terminator", "hook must end with ？ or ?")
    if not resp.cta.strip():
        raise SchemaError("cta", "empty_cta", "cta must be non-empty")


def parse_response(raw: str) -> HostResponse:
    """Parse the labeled-line wire format (SPOKEN:/SLOGAN:/HOOK:/CTA:).

    Unlabeled lines are ignored; the first occurrence of each label wins.
    Raises SchemaError on a missing field or any invariant violation.
    """
    values: dict[str, str] = {}
    for line in raw.splitlines():
        stripped = line.strip()
        for label in FIELD_LABELS:
            prefix = label + ":"
            if stripped.startswith(prefix) and label not in values:
                values[label] = stripped[len(prefix):].strip()
    for label, fname in zip(FIELD_LABELS, ("spoken", "slogan", "hook_question", "cta")):
        if label not in values:
            raise SchemaError(fname, "missing_field", f"no {label}: line found")
    resp = HostResponse(
        spoken=values["SPOKEN"],
        slogan=values["SLOGAN"],
        hook_question=values["HOOK"],
        cta=values["CTA"],
    )
    validate_host_response(resp)
    return resp


def render_response(resp: HostResponse) -> str:
    """Inverse of parse_response for valid responses."""
    return (f"SPOKEN: {resp.spoken}\nSLOGAN: {resp.slogan}\n"
            f"HOOK: {resp.hook_question}\nCTA: {resp.cta}")


# ---------------------------------------------------------------------------
# Claim validation


@dataclass(frozen=True)
class ClaimLexicons:
    """Closed scan lexicons for claim checking: curated off-catalogue terms."""

    off_catalogue_ingredients: tuple[str, ...]
    off_catalogue_products: tuple[str, ...]

    @classmethod
    def from_config(cls, cfg: dict) -> "ClaimLexicons":
        claims = cfg["claims"]
        return cls(
            off_catalogue_ingredients=tuple(claims["off_catalogue_ingredients"]),
            off_catalogue_products=tuple(claims["off_catalogue_products"]),
        )


@dataclass(frozen=True)
class Violation:
    kind: str  # fabricated_ingredient | unknown_product | unsanctioned_mention
    token: str
    detail: str = ""


def validate_claims(
    resp: HostResponse,
    active: Optional[ProductRecord],
    catalogue: Catalogue,
    lexicons: ClaimLexicons,
) -> list[Violation]:
    """Whitelist-pattern claim check over all four response fields.

    Flags ingredient-pattern tokens that are not glossary keys, product-pattern
    names outside the catalogue, and any product name other than the active
    product while one is set. Empty result means the response passes the
    correctness gate.
    """
    text = normalize_text(" ".join((resp.spoken, resp.slogan, resp.hook_question, resp.cta)))
    violations: list[Violation] = []
    for token in lexicons.off_catalogue_ingredients:
        if normalize_text(token) in text and token not in catalogue.glossary:
            violations.append(Violation("fabricated_ingredient", token,
                                        "ingredient-pattern token missing from glossary"))
    active_name = active.name if active is not None else None
    for record in catalogue.products:
        if normalize_text(record.name) in text and active_name is not None and record.name != active_name:
            violations.append(Violation("unsanctioned_mention", record.name,
                                        f"names a product other than the active {active_name!r}"))
    for token in lexicons.off_catalogue_products:
        if normalize_text(token) in text:
            violations.append(Violation("unknown_product", token,
                                        "product-pattern name outside the catalogue"))
            if active_name is not None:
                violations.append(Violation("unsanctioned_mention", token,
                                            f"names a product other than the active {active_name!r}"))
    return violations
