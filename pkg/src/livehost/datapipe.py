"""Dataset construction QA pipeline.

Four cleaning passes over line-delimited instance records, in fixed order:
near-duplicate removal (character n-gram Jaccard), PII scrubbing, structural
response validation, and a sentence-encoder coherence filter (a deterministic
hashed n-gram bag by default; real encoders plug in behind the same contract).
"""
from __future__ import annotations

import argparse
import json
import math
import re
import sys
import zlib
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional

from .config import default_config
from .dialogue import HostResponse, IntentLabel, SchemaError, validate_host_response

DEFAULT_DEDUP_THRESHOLD = 0.7
DEFAULT_DEDUP_NGRAM = 3
DEFAULT_COHERENCE_TAU = 0.3
NATURALNESS_GATE = 4.5


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetInstance:
    pair_id: str
    source: str  # real | synthetic
    system_prompt: str
    comment: str
    intent: IntentLabel
    response: HostResponse
    naturalness: Optional[float] = None

    def __post_init__(self):
        if self.source not in ("real", "synthetic"):
            raise DatasetError(f"source must be real|synthetic, got {self.source!r}")


def instance_from_dict(raw: dict, where: str = "instance") -> DatasetInstance:
    try:
        resp = raw["response"]
        return DatasetInstance(
            pair_id=str(raw["pair_id"]),
            source=str(raw["source"]),
            system_prompt=str(raw["system_prompt"]),
            comment=str(raw["comment"]),
            intent=IntentLabel(raw["intent"]),
            response=HostResponse(
                spoken=str(resp["spoken"]),
                slogan=str(resp["slogan"]),
                hook_question=str(resp["hook_question"]),
                cta=str(resp["cta"]),
            ),
            naturalness=float(raw["naturalness"]) if "naturalness" in raw else None,
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise DatasetError(f"{where}: malformed record: {exc}") from exc


def instance_to_dict(inst: DatasetInstance) -> dict:
    out = {
        "pair_id": inst.pair_id,
        "source": inst.source,
        "system_prompt": inst.system_prompt,
        "comment": inst.comment,
        "intent": inst.intent.value,
        "response": {
            "spoken": inst.response.spoken,
            "slogan": inst.response.slogan,
            "hook_question": inst.response.hook_question,
            "cta": inst.response.cta,
        },
    }
    if inst.naturalness is not None:
        out["naturalness"] = inst.naturalness
    return out


def read_instances(path: Path) -> list[DatasetInstance]:
    instances = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            instances.append(instance_from_dict(raw, where=f"{path}:{lineno}"))
    return instances


def write_instances(path: Path, instances: list[DatasetInstance]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for inst in instances:
            handle.write(json.dumps(instance_to_dict(inst), ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# Pass 1: near-duplicate removal


def char_grams(text: str, n: int) -> frozenset[str]:
    return frozenset(text[i:i + n] for i in range(len(text) - n + 1))


def jaccard_ngram(a: str, b: str, n: int) -> float:
    """Character n-gram Jaccard similarity.

    Two empty gram sets count as duplicates (1.0); exactly one empty set
    yields 0.0.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    ga, gb = char_grams(a, n), char_grams(b, n)
    if not ga and not gb:
        return 1.0
    if not ga or not gb:
        return 0.0
    return len(ga & gb) / len(ga | gb)


def dedup_pass(
    instances: list[DatasetInstance],
    threshold: float = DEFAULT_DEDUP_THRESHOLD,
    n: int = DEFAULT_DEDUP_NGRAM,
) -> tuple[list[DatasetInstance], list[tuple[DatasetInstance, DatasetInstance]]]:
    """Greedy in-file-order dedup on comment text.

    An instance is dropped when its comment's Jaccard against an already-kept
    comment exceeds the threshold (or the gram sets are identical, so exact
    duplicates fall even at threshold 1.0). Earlier instances always survive.
    An inverted gram index prunes the candidate set; results match the
    brute-force all-pairs rule exactly.
    """
    survivors: list[DatasetInstance] = []
    removed: list[tuple[DatasetInstance, DatasetInstance]] = []
    kept_grams: list[frozenset[str]] = []
    gram_index: dict[str, list[int]] = {}
    empty_gram_keeper: Optional[int] = None

    for inst in instances:
        grams = char_grams(inst.comment, n)
        duplicate_of: Optional[int] = None
        if not grams:
            duplicate_of = empty_gram_keeper
        else:
            candidates = sorted({idx for g in grams for idx in gram_index.get(g, ())})
            for idx in candidates:
                other = kept_grams[idx]
                union = len(grams | other)
                j = len(grams & other) / union if union else 1.0
                if j > threshold or grams == other:
                    duplicate_of = idx
                    break
        if duplicate_of is not None:
            removed.append((inst, survivors[duplicate_of]))
            continue
        keeper_idx = len(survivors)
        survivors.append(inst)
        kept_grams.append(grams)
        if grams:
            for g in grams:
                gram_index.setdefault(g, []).append(keeper_idx)
        elif empty_gram_keeper is None:
            empty_gram_keeper = keeper_idx
    return survivors, removed


# ---------------------------------------------------------------------------
# Pass 2: PII scrubbing


def compile_pii_patterns(cfg: Optional[dict] = None) -> list[tuple[str, re.Pattern]]:
    cfg = cfg or default_config()
    return [(p["label"], re.compile(p["pattern"])) for p in cfg["pii_patterns"]]


def scrub_text(text: str, patterns: list[tuple[str, re.Pattern]]) -> str:
    for label, pattern in patterns:
        text = pattern.sub(f"<{label}>", text)
    return text


def pii_pass(
    instances: list[DatasetInstance],
    patterns: list[tuple[str, re.Pattern]],
) -> tuple[list[DatasetInstance], int]:
    """Replace configured PII shapes with typed placeholders. Idempotent;
    scrubbing modifies instances, it never removes them."""
    out: list[DatasetInstance] = []
    scrubbed = 0
    for inst in instances:
        comment = scrub_text(inst.comment, patterns)
        resp = inst.response
        fields = {name: scrub_text(getattr(resp, name), patterns)
                  for name in ("spoken", "slogan", "hook_question", "cta")}
        new_resp = HostResponse(**fields)
        if comment != inst.comment or new_resp != resp:
            scrubbed += 1
            inst = replace(inst, comment=comment, response=new_resp)
        out.append(inst)
    return out, scrubbed


# ---------------------------------------------------------------------------
# Pass 3: structural validation


def structure_pass(
    instances: list[DatasetInstance],
) -> tuple[list[DatasetInstance], list[DatasetInstance]]:
    survivors, rejected = [], []
    for inst in instances:
        try:
            validate_host_response(inst.response)
            survivors.append(inst)
        except SchemaError:
            rejected.append(inst)
    return survivors, rejected


# ---------------------------------------------------------------------------
# Pass 4: coherence filter


def hashed_ngram_embedding(text: str, n: int = 2, dims: int = 256) -> dict[int, float]:
    """Deterministic bag of hashed character n-grams (crc32 buckets)."""
    vec: dict[int, float] = {}
    for i in range(len(text) - n + 1):
        bucket = zlib.crc32(text[i:i + n].encode("utf-8")) % dims
        vec[bucket] = vec.get(bucket, 0.0) + 1.0
    return vec


def cosine(a: dict[int, float], b: dict[int, float]) -> float:
    if not a or not b:
        return 0.0
    dot = sum(v * b.get(k, 0.0) for k, v in a.items())
    norm = math.sqrt(sum(v * v for v in a.values())) * math.sqrt(sum(v * v for v in b.values()))
    return dot / norm if norm else 0.0


def coherence_pass(
    instances: list[DatasetInstance],
    embed_backend: Optional[Callable[[str], dict[int, float]]] = None,
    tau: float = DEFAULT_COHERENCE_TAU,
) -> tuple[list[DatasetInstance], list[DatasetInstance]]:
    """Keep instances whose comment/spoken embedding cosine is >= tau."""
    embed = embed_backend or hashed_ngram_embedding
    survivors, rejected = [], []
    for inst in instances:
        sim = cosine(embed(inst.comment), embed(inst.response.spoken))
        (survivors if sim >= tau else rejected).append(inst)
    return survivors, rejected


# ---------------------------------------------------------------------------
# Reporting and the full pipeline


def distribution_report(instances: list[DatasetInstance]) -> dict:
    histogram = {label.value: 0 for label in IntentLabel}
    for inst in instances:
        histogram[inst.intent.value] += 1
    total = len(instances)
    proportions = {k: (v / total if total else 0.0) for k, v in histogram.items()}
    return {"total": total, "histogram": histogram, "proportions": proportions}


@dataclass
class CleaningReport:
    input_count: int
    dedup_removed: int
    pii_scrubbed: int
    structure_rejected: int
    coherence_rejected: int
    survivors: int
    intent_histogram: dict
    intent_proportions: dict
    low_naturalness_flagged: int
    params: dict

    def to_dict(self) -> dict:
        return {
            "input_count": self.input_count,
            "passes": {
                "dedup_removed": self.dedup_removed,
                "pii_scrubbed": self.pii_scrubbed,
                "structure_rejected": self.structure_rejected,
                "coherence_rejected": self.coherence_rejected,
            },
            "survivors": self.survivors,
            "intent_histogram": self.intent_histogram,
            "intent_proportions": self.intent_proportions,
            "low_naturalness_flagged": self.low_naturalness_flagged,
            "params": self.params,
        }


def clean(
    instances: list[DatasetInstance],
    dedup_threshold: float = DEFAULT_DEDUP_THRESHOLD,
    dedup_n: int = DEFAULT_DEDUP_NGRAM,
    tau: float = DEFAULT_COHERENCE_TAU,
    patterns: Optional[list[tuple[str, re.Pattern]]] = None,
    embed_backend: Optional[Callable[[str], dict[int, float]]] = None,
) -> tuple[list[DatasetInstance], CleaningReport]:
    """Run all four passes in order: dedup -> pii -> structure -> coherence."""
    patterns = patterns if patterns is not None else compile_pii_patterns()
    input_count = len(instances)
    survivors, removed = dedup_pass(instances, threshold=dedup_threshold, n=dedup_n)
    survivors, scrub_count = pii_pass(survivors, patterns)
    survivors, structure_rejected = structure_pass(survivors)
    survivors, coherence_rejected = coherence_pass(survivors, embed_backend, tau=tau)
    dist = distribution_report(survivors)
    # Annotation-time gate: flag (never drop) instances whose recorded mean
    # naturalness does not exceed the bar.
    flagged = sum(1 for i in survivors
                  if i.naturalness is not None and i.naturalness <= NATURALNESS_GATE)
    report = CleaningReport(
        input_count=input_count,
        dedup_removed=len(removed),
        pii_scrubbed=scrub_count,
        structure_rejected=len(structure_rejected),
        coherence_rejected=len(coherence_rejected),
        survivors=len(survivors),
        intent_histogram=dist["histogram"],
        intent_proportions=dist["proportions"],
        low_naturalness_flagged=flagged,
        params={"dedup_threshold": dedup_threshold, "dedup_n": dedup_n, "tau": tau},
    )
    assert report.survivors + report.dedup_removed + report.structure_rejected \
        + report.coherence_rejected == report.input_count
    return survivors, report


# ---------------------------------------------------------------------------
# CLI


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="datapipe",
                                     description="dataset cleaning pipeline")
    sub = parser.add_subparsers(dest="command", required=True)
    p_clean = sub.add_parser("clean", help="run the four cleaning passes")
    p_clean.add_argument("input", type=Path)
    p_clean.add_argument("output", type=Path)
    p_clean.add_argument("--report", type=Path, help="write the JSON report here")
    p_clean.add_argument("--dedup-threshold", type=float, default=DEFAULT_DEDUP_THRESHOLD)
    p_clean.add_argument("--ngram", type=int, default=DEFAULT_DEDUP_NGRAM)
    p_clean.add_argument("--tau", type=float, default=DEFAULT_COHERENCE_TAU)
    args = parser.parse_args(argv)

    try:
        instances = read_instances(args.input)
        survivors, report = clean(
            instances,
            dedup_threshold=args.dedup_threshold,
            dedup_n=args.ngram,
            tau=args.tau,
        )
    except DatasetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    write_instances(args.output, survivors)
    payload = json.dumps(report.to_dict(), ensure_ascii=False, indent=2)
    if args.report:
        args.report.write_text(payload + "\n", encoding="utf-8")
    print(payload)
    return 0


if __name__ == "__main__":
    sys.exit(main())
