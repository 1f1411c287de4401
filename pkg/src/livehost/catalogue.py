"""Product knowledge base: records, glossary, pitch scripts, keyword retrieval.

The catalogue is loaded once from a YAML document and is immutable afterwards,
so it is safe for unrestricted concurrent reads.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

import yaml

_CJK_RE = re.compile(r"[一-鿿]")
_WS_RE = re.compile(r"\s+")

ARC_ORDER = ("hook", "explain", "guide", "close")


class Category(str, Enum):
    CLEANSER = "cleanser"
    SERUM = "serum"
    MOISTURIZER = "moisturizer"
    SUNSCREEN = "sunscreen"


CATEGORY_LABELS = {
    Category.CLEANSER: "洁面",
    Category.SERUM: "精华",
    Category.MOISTURIZER: "面霜",
    Category.SUNSCREEN: "防晒",
}


class CatalogueError(ValueError):
    """Raised when the catalogue document fails to parse or violates an invariant."""


def normalize_text(text: str) -> str:
    """Case-fold and collapse whitespace; substring matching runs on this form."""
    return _WS_RE.sub(" ", text.casefold()).strip()


def cjk_count(text: str) -> int:
    """Number of CJK unified ideographs; punctuation and Latin never count."""
    return len(_CJK_RE.findall(text))


@dataclass(frozen=True)
class Ingredient:
    name: str
    role: str


@dataclass(frozen=True)
class ProductRecord:
    """One catalogue entry. routing_id is for session routing only and must
    never appear in any generation context."""

    routing_id: int
    name: str
    category: Category
    ingredients: tuple[Ingredient, ...]
    texture: str
    skin_types: tuple[str, ...]
    usage: str
    talking_points: tuple[str, ...]
    disclaimer: str

    def name_tokens(self) -> tuple[str, ...]:
        # Full normalized name plus whitespace-split tokens of length >= 2;
        # Chinese names have no whitespace, so the full name is the only token.
        norm = normalize_text(self.name)
        toks = [norm] + [t for t in norm.split(" ") if len(t) >= 2]
        return tuple(dict.fromkeys(toks))


@dataclass(frozen=True)
class PitchScript:
    routing_id: int
    sentences: tuple[str, ...]
    arc_tags: tuple[str, ...]


@dataclass(frozen=True)
class RetrievalResult:
    record: ProductRecord
    category_hit: Optional[Category]
    coverage: float


@dataclass(frozen=True)
class CoverageWeights:
    """Keyword-class weights; full coverage is reached at name+category weight."""

    name: float = 3.0
    category: float = 2.0
    ingredient: float = 1.0

    def full_bar(self) -> float:
        return self.name + self.category


DEFAULT_WEIGHTS = CoverageWeights()
DEFAULT_RETRIEVAL_THRESHOLD = 0.15


@dataclass(frozen=True)
class Catalogue:
    """Immutable bundle of products, glossary, keyword table and pitch scripts."""

    products: tuple[ProductRecord, ...]
    glossary: dict[str, str]
    keyword_table: dict[Category, tuple[str, ...]]
    scripts: tuple[PitchScript, ...]
    _by_routing: dict[int, ProductRecord] = field(repr=False, default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "_by_routing", {p.routing_id: p for p in self.products})

    def product(self, routing_id: int) -> ProductRecord:
        return self._by_routing[routing_id]

    def script_product(self, script_index: int) -> ProductRecord:
        return self.product(self.scripts[script_index].routing_id)

    def detect_category(self, comment_text: str) -> Optional[Category]:
        """Category with the most keyword occurrences in the text, or None.

        Ties break toward the fixed Category declaration order.
        """
        text = normalize_text(comment_text)
        best: Optional[Category] = None
        best_hits = 0
        for cat in Category:
            hits = sum(text.count(normalize_text(kw)) for kw in self.keyword_table.get(cat, ()))
            if hits > best_hits:
                best, best_hits = cat, hits
        return best

    def coverage_score(
        self,
        comment_text: str,
        record: ProductRecord,
        weights: CoverageWeights = DEFAULT_WEIGHTS,
    ) -> float:
        """Weighted keyword hit ratio in [0, 1].

        Name tokens score ``weights.name``, a category-keyword hit scores
        ``weights.category`` and each matched ingredient ``weights.ingredient``.
        The ratio saturates at the name+category bar, so a comment carrying
        the exact product name and a category keyword reaches 1.0.
        """
        full = weights.full_bar()
        if full <= 0:
            raise ValueError("name+category weights must be positive")
        text = normalize_text(comment_text)
        matched = 0.0
        if any(tok in text for tok in record.name_tokens()):
            matched += weights.name
        if any(normalize_text(kw) in text for kw in self.keyword_table.get(record.category, ())):
            matched += weights.category
        for ing in record.ingredients:
            if normalize_text(ing.name) in text:
                matched += weights.ingredient
        if matched == 0.0:
            return 0.0
        return min(1.0, matched / full)

    def retrieve(
        self,
        comment_text: str,
        threshold: float = DEFAULT_RETRIEVAL_THRESHOLD,
        weights: CoverageWeights = DEFAULT_WEIGHTS,
    ) -> Optional[RetrievalResult]:
        """Best-covered record for the comment, or None below the threshold.

        Candidates are restricted to the detected category when there is one;
        ties keep the earliest catalogue entry.
        """
        category_hit = self.detect_category(comment_text)
        pool = [p for p in self.products if p.category == category_hit] if category_hit else list(self.products)
        best: Optional[ProductRecord] = None
        best_score = 0.0
        for record in pool:
            score = self.coverage_score(comment_text, record, weights)
            if score > best_score:
                best, best_score = record, score
        if best is None or best_score < threshold:
            return None
        return RetrievalResult(record=best, category_hit=category_hit, coverage=best_score)


def serialize_for_prompt(record: ProductRecord, glossary: dict[str, str]) -> str:
    """Render a record for prompt grounding. routing_id is deliberately absent."""
    lines = [
        f"产品名称: {record.name}",
        f"品类: {CATEGORY_LABELS[record.category]}",
        f"质地: {record.texture}",
        f"适合肤质: {'、'.join(record.skin_types)}",
        "核心成分:",
    ]
    for ing in record.ingredients:
        if ing.name not in glossary:
            raise CatalogueError(f"ingredient {ing.name!r} of {record.name!r} missing from glossary")
        lines.append(f"- {ing.name}（{ing.role}）: {glossary[ing.name]}")
    lines.append(f"用法: {record.usage}")
    lines.append("卖点:")
    lines.extend(f"- {tp}" for tp in record.talking_points)
    lines.append(f"合规声明: {record.disclaimer}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Loading


def _require_keys(mapping: dict, allowed: set[str], required: set[str], where: str) -> None:
    if not isinstance(mapping, dict):
        raise CatalogueError(f"{where}: expected a mapping, got {type(mapping).__name__}")
    unknown = set(mapping) - allowed
    if unknown:
        raise CatalogueError(f"{where}: unknown fields {sorted(unknown)}")
    missing = required - set(mapping)
    if missing:
        raise CatalogueError(f"{where}: missing fields {sorted(missing)}")


def _parse_product(raw: dict, index: int) -> ProductRecord:
    where = f"products[{index}]"
    fields = {"routing_id", "name", "category", "ingredients", "texture",
              "skin_types", "usage", "talking_points", "disclaimer"}
    _require_keys(raw, fields, fields, where)
    try:
        category = Category(raw["category"])
    except ValueError:
        raise CatalogueError(f"{where} ({raw.get('name')}): unknown category {raw['category']!r}") from None
    ingredients = []
    for j, ing in enumerate(raw["ingredients"]):
        _require_keys(ing, {"name", "role"}, {"name", "role"}, f"{where}.ingredients[{j}]")
        ingredients.append(Ingredient(name=str(ing["name"]), role=str(ing["role"])))
    record = ProductRecord(
        routing_id=int(raw["routing_id"]),
        name=str(raw["name"]),
        category=category,
        ingredients=tuple(ingredients),
        texture=str(raw["texture"]),
        skin_types=tuple(str(s) for s in raw["skin_types"]),
        usage=str(raw["usage"]),
        talking_points=tuple(str(t) for t in raw["talking_points"]),
        disclaimer=str(raw["disclaimer"]),
    )
    for attr in ("name", "disclaimer"):
        if not getattr(record, attr).strip():
            raise CatalogueError(f"{where}: {attr} must be non-empty")
    return record


def _parse_script(raw: dict, index: int, names: dict[int, str]) -> PitchScript:
    where = f"scripts[{index}]"
    _require_keys(raw, {"routing_id", "sentences"}, {"routing_id", "sentences"}, where)
    routing_id = int(raw["routing_id"])
    label = names.get(routing_id, f"routing_id={routing_id}")
    sentences, arcs = [], []
    for j, s in enumerate(raw["sentences"]):
        _require_keys(s, {"text", "arc"}, {"text", "arc"}, f"{where}.sentences[{j}]")
        text, arc = str(s["text"]), str(s["arc"])
        if not text.strip():
            raise CatalogueError(f"script for {label}: sentence {j} is empty")
        if arc not in ARC_ORDER:
            raise CatalogueError(f"script for {label}: unknown arc tag {arc!r}")
        sentences.append(text)
        arcs.append(arc)
    ranks = [ARC_ORDER.index(a) for a in arcs]
    if ranks != sorted(ranks) or set(arcs) != set(ARC_ORDER):
        raise CatalogueError(
            f"script for {label}: arc tags must run hook→explain→guide→close with each present"
        )
    total = cjk_count("".join(sentences))
    if not 180 <= total <= 240:
        raise CatalogueError(f"script for {label}: {total} characters, outside [180, 240]")
    return PitchScript(routing_id=routing_id, sentences=tuple(sentences), arc_tags=tuple(arcs))


def load_catalogue(source: bytes | str | Path) -> Catalogue:
    """Parse and validate a catalogue document.

    Accepts raw YAML bytes/text or a filesystem path. Raises CatalogueError
    naming the offending record and invariant on any violation.
    """
    if isinstance(source, Path):
        text = source.read_text(encoding="utf-8")
    elif isinstance(source, bytes):
        text = source.decode("utf-8")
    else:
        text = source
        if "\n" not in text and 0 < len(text) < 4096 and Path(text).is_file():
            text = Path(text).read_text(encoding="utf-8")
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise CatalogueError(f"catalogue does not parse: {exc}") from exc
    if not isinstance(doc, dict):
        raise CatalogueError("catalogue document is empty or not a mapping")
    top = {"products", "glossary", "keyword_table", "scripts"}
    _require_keys(doc, top, top, "catalogue")

    glossary: dict[str, str] = {}
    for i, raw in enumerate(doc["glossary"]):
        _require_keys(raw, {"name", "description"}, {"name", "description"}, f"glossary[{i}]")
        name, desc = str(raw["name"]), str(raw["description"])
        if name in glossary:
            raise CatalogueError(f"glossary entry {name!r} is duplicated")
        if not desc.strip():
            raise CatalogueError(f"glossary entry {name!r} has an empty description")
        glossary[name] = desc

    products = [_parse_product(raw, i) for i, raw in enumerate(doc["products"])]
    seen_ids: set[int] = set()
    for record in products:
        if record.routing_id in seen_ids:
            raise CatalogueError(f"routing_id {record.routing_id} ({record.name}) is not unique")
        seen_ids.add(record.routing_id)
        for ing in record.ingredients:
            if ing.name not in glossary:
                raise CatalogueError(
                    f"product {record.name!r}: ingredient {ing.name!r} missing from glossary"
                )

    keyword_table: dict[Category, tuple[str, ...]] = {}
    for key, words in doc["keyword_table"].items():
        try:
            cat = Category(key)
        except ValueError:
            raise CatalogueError(f"keyword_table: unknown category {key!r}") from None
        keyword_table[cat] = tuple(str(w) for w in words)

    names = {p.routing_id: p.name for p in products}
    scripts = [_parse_script(raw, i, names) for i, raw in enumerate(doc["scripts"])]
    script_ids = [s.routing_id for s in scripts]
    if sorted(script_ids) != sorted(seen_ids):
        raise CatalogueError("catalogue must carry exactly one pitch script per product")

    return Catalogue(
        products=tuple(products),
        glossary=glossary,
        keyword_table=keyword_table,
        scripts=tuple(scripts),
    )


def default_catalogue_path() -> Path:
    return Path(__file__).parent / "data" / "catalogue.yaml"


def load_default_catalogue() -> Catalogue:
    return load_catalogue(default_catalogue_path())
