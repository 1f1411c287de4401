"""Evaluation machinery: automatic correctness checking, Krippendorff's alpha
for inter-annotator agreement, rubric-based LLM-as-judge scoring behind the
generation-backend contract, and the runtime ablation runner."""
from __future__ import annotations

import argparse
import csv
import json
import re
import sys
import warnings
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

from .backends import GenerationBackend, StubBackend
from .catalogue import Catalogue, ProductRecord, load_catalogue, load_default_catalogue
from .config import default_config
from .dialogue import (
    AblationFlags,
    ClaimLexicons,
    HostResponse,
    ViewerComment,
    validate_claims,
)
from .pipeline import PipelineSettings, respond
from .rerank import RecentHistory


# ---------------------------------------------------------------------------
# Correctness


def correctness_rate(
    responses: Sequence[HostResponse],
    catalogue: Catalogue,
    lexicons: ClaimLexicons,
    actives: Optional[Sequence[Optional[ProductRecord]]] = None,
) -> float:
    """Fraction of responses with no out-of-catalogue factual claims."""
    if not responses:
        raise ValueError("correctness_rate requires at least one response")
    if actives is None:
        actives = [None] * len(responses)
    if len(actives) != len(responses):
        raise ValueError("actives must align with responses")
    clean = sum(
        1 for resp, active in zip(responses, actives)
        if not validate_claims(resp, active, catalogue, lexicons)
    )
    return clean / len(responses)


# ---------------------------------------------------------------------------
# Krippendorff's alpha


class RatingLevel(str, Enum):
    NOMINAL = "nominal"
    INTERVAL = "interval"


@dataclass(frozen=True)
class RatingMatrix:
    """Items x annotators grid; None marks a missing rating."""

    values: tuple[tuple[Optional[float], ...], ...]
    level: RatingLevel = RatingLevel.NOMINAL

    def __post_init__(self):
        if len(self.values) < 1:
            raise ValueError("rating matrix needs at least one item")
        width = {len(row) for row in self.values}
        if len(width) != 1:
            raise ValueError("all items must carry the same annotator columns")
        if width.pop() < 2:
            raise ValueError("rating matrix needs at least two annotators")


def _delta(level: RatingLevel, a: float, b: float) -> float:
    if level is RatingLevel.NOMINAL:
        return 0.0 if a == b else 1.0
    return (a - b) ** 2


def krippendorff_alpha(matrix: RatingMatrix) -> float:
    """Coincidence-matrix Krippendorff's alpha for the declared level.

    Missing entries are allowed; items with fewer than two ratings do not
    pair. A degenerate matrix (zero expected disagreement) returns 1.0 with a
    RuntimeWarning rather than dividing by zero.
    """
    units = [[v for v in row if v is not None] for row in matrix.values]
    units = [u for u in units if len(u) >= 2]
    n = sum(len(u) for u in units)
    if n == 0:
        raise ValueError("no pairable ratings in the matrix")

    observed = 0.0
    for unit in units:
        m = len(unit)
        pair_sum = sum(
            _delta(matrix.level, unit[i], unit[j])
            for i in range(m) for j in range(m) if i != j
        )
        observed += pair_sum / (m - 1)
    observed /= n

    marginals: dict[float, int] = {}
    for unit in units:
        for value in unit:
            marginals[value] = marginals.get(value, 0) + 1
    expected = 0.0
    for c, nc in marginals.items():
        for k, nk in marginals.items():
            expected += nc * nk * _delta(matrix.level, c, k)
    expected /= n * (n - 1)

    if expected == 0.0:
        warnings.warn("degenerate rating matrix: zero expected disagreement, "
                      "alpha reported as 1.0", RuntimeWarning, stacklevel=2)
        return 1.0
    return 1.0 - observed / expected


def rating_matrix_from_csv(path: Path, level: RatingLevel) -> RatingMatrix:
    """CSV rows are items, columns annotators; empty cells mean missing."""
    rows: list[tuple[Optional[float], ...]] = []
    with open(path, encoding="utf-8", newline="") as handle:
        for row in csv.reader(handle):
            if not row:
                continue
            rows.append(tuple(float(cell) if cell.strip() != "" else None for cell in row))
    return RatingMatrix(values=tuple(rows), level=level)


# ---------------------------------------------------------------------------
# LLM-as-judge


class JudgeDimension(str, Enum):
    CREATIVITY = "Creativity"
    ENGAGEMENT = "Engagement"


@dataclass(frozen=True)
class JudgeScore:
    dimension: JudgeDimension
    score: int
    rationale: str

    def __post_init__(self):
        if not 1 <= self.score <= 5:
            raise ValueError("judge score must be within 1-5")


class JudgeError(RuntimeError):
    """The judge backend answered, but not with a parseable score."""


_SCORE_RE = re.compile(r"^SCORE:\s*([1-5])\s*$", re.MULTILINE)
_RATIONALE_RE = re.compile(r"^RATIONALE:\s*(.+)$", re.MULTILINE)


def judge(
    response: HostResponse,
    dimension: JudgeDimension,
    backend: GenerationBackend,
    cfg: Optional[dict] = None,
) -> JudgeScore:
    """Rubric-scored judgement; a parse failure raises, never defaults."""
    cfg = cfg or default_config()
    from .dialogue import SamplingParams, render_response

    prompt = cfg["judge_rubric"].format(
        dimension=dimension.value,
        dimension_desc=cfg["judge_dimensions"][dimension.value],
        response=render_response(response),
    )
    raws = backend.generate(prompt, SamplingParams(temperature=0.1, candidates=1))
    raw = raws[0] if raws else ""
    score_match = _SCORE_RE.search(raw)
    if score_match is None:
        raise JudgeError(f"no SCORE line in judge output: {raw[:120]!r}")
    rationale_match = _RATIONALE_RE.search(raw)
    return JudgeScore(
        dimension=dimension,
        score=int(score_match.group(1)),
        rationale=rationale_match.group(1).strip() if rationale_match else "",
    )


# ---------------------------------------------------------------------------
# Ablation runner


STANDARD_GRID: tuple[tuple[str, AblationFlags], ...] = (
    ("baseline", AblationFlags()),
    ("tt_disabled", AblationFlags(tt_disabled=True)),
    ("pci_disabled", AblationFlags(pci_disabled=True)),
    ("rr_disabled", AblationFlags(rr_disabled=True)),
)


def run_ablation(
    comments: Sequence[str],
    catalogue: Optional[Catalogue] = None,
    cfg: Optional[dict] = None,
    backend: Optional[GenerationBackend] = None,
    grid: Optional[Sequence[tuple[str, AblationFlags]]] = None,
    judge_backend: Optional[GenerationBackend] = None,
) -> list[dict]:
    """Run the full pipeline per config x comment and report observables.

    Each config runs with a fresh recent-response ring, mirroring a live
    session. Judge scores are attached only when a judge backend is given.
    """
    if not comments:
        raise ValueError("run_ablation requires at least one comment")
    cfg = cfg or default_config()
    catalogue = catalogue or load_default_catalogue()
    backend = backend or StubBackend(cfg, seed=int(cfg["service"].get("stub_seed", 0)))
    settings = PipelineSettings.from_config(cfg)
    grid = grid if grid is not None else STANDARD_GRID

    results = []
    for name, flags in grid:
        history = RecentHistory()
        rows = []
        responses = []
        actives = []
        for i, text in enumerate(comments, start=1):
            comment = ViewerComment(comment_id=f"e{i:04d}", text=text, author="evalkit")
            outcome = respond(comment, catalogue, settings, backend,
                              flags=flags, history=history)
            history.add(outcome.response.spoken)
            responses.append(outcome.response)
            actives.append(outcome.retrieval.record if outcome.retrieval else None)
            row = {
                "comment": text,
                "intent": outcome.intent.label.value,
                "selected_index": outcome.selected_index,
                "used_fallback": outcome.used_fallback,
                "violations": len(outcome.violations),
                "prompt": outcome.prompt,
                "response": {
                    "spoken": outcome.response.spoken,
                    "slogan": outcome.response.slogan,
                    "hook_question": outcome.response.hook_question,
                    "cta": outcome.response.cta,
                },
            }
            if judge_backend is not None:
                row["judge"] = {
                    dim.value: judge(outcome.response, dim, judge_backend, cfg).score
                    for dim in JudgeDimension
                }
            rows.append(row)
        results.append({
            "config": name,
            "flags": {"tt_disabled": flags.tt_disabled,
                      "pci_disabled": flags.pci_disabled,
                      "rr_disabled": flags.rr_disabled},
            "n": len(rows),
            "correctness_rate": correctness_rate(responses, catalogue,
                                                 settings.claim_lexicons, actives),
            "rows": rows,
        })
    return results


# ---------------------------------------------------------------------------
# CLI


def _load_responses_file(path: Path, catalogue: Catalogue) -> tuple[list[HostResponse], list]:
    responses, actives = [], []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            raw = json.loads(line)
            resp = raw["response"]
            responses.append(HostResponse(
                spoken=str(resp["spoken"]), slogan=str(resp["slogan"]),
                hook_question=str(resp["hook_question"]), cta=str(resp["cta"]),
            ))
            routing = raw.get("active_routing_id")
            actives.append(catalogue.product(int(routing)) if routing is not None else None)
    return responses, actives


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="evalkit", description="evaluation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_corr = sub.add_parser("correctness", help="correctness rate over a response file")
    p_corr.add_argument("responses", type=Path)
    p_corr.add_argument("--catalogue", type=Path)

    p_alpha = sub.add_parser("alpha", help="Krippendorff's alpha over a rating CSV")
    p_alpha.add_argument("matrix", type=Path)
    p_alpha.add_argument("--level", choices=[l.value for l in RatingLevel],
                         default=RatingLevel.NOMINAL.value)

    p_abl = sub.add_parser("ablate", help="run the ablation grid")
    p_abl.add_argument("--grid", type=Path, required=True,
                       help="JSON file with configs and comments")
    p_abl.add_argument("--out", type=Path, help="write the full results table here")

    args = parser.parse_args(argv)
    cfg = default_config()

    if args.command == "correctness":
        catalogue = load_catalogue(args.catalogue) if args.catalogue else load_default_catalogue()
        responses, actives = _load_responses_file(args.responses, catalogue)
        rate = correctness_rate(responses, catalogue, ClaimLexicons.from_config(cfg), actives)
        print(json.dumps({"n": len(responses), "correctness_rate": rate}))
        return 0

    if args.command == "alpha":
        matrix = rating_matrix_from_csv(args.matrix, RatingLevel(args.level))
        print(json.dumps({"alpha": krippendorff_alpha(matrix), "level": args.level}))
        return 0

    if args.command == "ablate":
        grid_doc = json.loads(args.grid.read_text(encoding="utf-8"))
        names = grid_doc.get("configs") or [name for name, _ in STANDARD_GRID]
        known = dict(STANDARD_GRID)
        try:
            grid = [(name, known[name]) for name in names]
        except KeyError as exc:
            print(f"error: unknown config {exc}", file=sys.stderr)
            return 2
        comments = grid_doc["comments"]
        results = run_ablation(comments, cfg=cfg, grid=grid)
        if args.out:
            args.out.write_text(json.dumps(results, ensure_ascii=False, indent=2) + "\n",
                                encoding="utf-8")
        summary = [{"config": r["config"], "n": r["n"],
                    "correctness_rate": r["correctness_rate"]} for r in results]
        print(json.dumps(summary, ensure_ascii=False, indent=2))
        return 0

    return 2  # pragma: no cover


if __name__ == "__main__":
    sys.exit(main())
