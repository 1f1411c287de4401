"""Generation backends behind one contract: prompt in, N raw candidates out.

Two implementations ship: a deterministic template stub for tests/CI that only
emits catalogue-sourced text, and a remote inference-endpoint client for live
use. Sampling parameters pass through to the remote endpoint verbatim.
"""
from __future__ import annotations

import random
import zlib
from typing import Optional, Protocol

import requests

from .catalogue import CATEGORY_LABELS
from .dialogue import (
    PRODUCT_CLOSE,
    PRODUCT_OPEN,
    GenerationRequest,
    SamplingParams,
    assemble_prompt,
)


class GenerationError(RuntimeError):
    """Backend failure; carries whatever candidates arrived before it."""

    def __init__(self, message: str, partial: Optional[list[str]] = None):
        super().__init__(message)
        self.partial: list[str] = partial or []


class GenerationBackend(Protocol):
    def generate(self, prompt: str, sampling: SamplingParams) -> list[str]: ...


def stable_seed(prompt: str, seed: int) -> int:
    return zlib.crc32(prompt.encode("utf-8")) * 1000003 + seed


def _product_block(prompt: str) -> Optional[str]:
    start = prompt.find(PRODUCT_OPEN)
    end = prompt.find(PRODUCT_CLOSE)
    if start < 0 or end < 0 or end <= start:
        return None
    return prompt[start + len(PRODUCT_OPEN):end]


_LABEL_TO_CATEGORY = {v: k for k, v in CATEGORY_LABELS.items()}


class StubBackend:
    """Deterministic template backend.

    Candidates are composed from the product block found in the prompt (name,
    category, talking points) plus fixed template pools, so every emitted
    claim is catalogue-sourced. Identical (prompt, seed) produce identical
    candidate lists.
    """

    def __init__(self, cfg: dict, seed: int = 0):
        stub = cfg["stub_backend"]
        self.spoken_templates: list[str] = list(stub["spoken_templates"])
        self.no_product_spoken: list[str] = list(stub["no_product_spoken"])
        self.slogans: dict[str, list[str]] = {k: list(v) for k, v in stub["slogans"].items()}
        self.hooks: list[str] = list(stub["hooks"])
        self.ctas: list[str] = list(stub["ctas"])
        self.seed = seed

    def generate(self, prompt: str, sampling: SamplingParams) -> list[str]:
        rng = random.Random(stable_seed(prompt, self.seed))
        block = _product_block(prompt)
        name, category, points = None, None, []
        if block:
            in_points = False
            for line in block.splitlines():
                line = line.strip()
                if line.startswith("产品名称:"):
                    name = line.split(":", 1)[1].strip()
                elif line.startswith("品类:"):
                    category = _LABEL_TO_CATEGORY.get(line.split(":", 1)[1].strip())
                elif line == "卖点:":
                    in_points = True
                elif in_points and line.startswith("- "):
                    points.append(line[2:].strip())
                elif in_points:
                    in_points = False
        slogan_pool = list(self.slogans["generic"])
        if category is not None:
            slogan_pool = list(self.slogans.get(category.value, [])) + slogan_pool

        out = []
        for i in range(sampling.candidates):
            if name and points:
                template = self.spoken_templates[(i + rng.randrange(len(self.spoken_templates)))
                                                 % len(self.spoken_templates)]
                point = points[(i + rng.randrange(len(points))) % len(points)]
                spoken = template.format(name=name, point=point)
            else:
                spoken = self.no_product_spoken[(i + rng.randrange(len(self.no_product_spoken)))
                                                % len(self.no_product_spoken)]
            slogan = slogan_pool[(i + rng.randrange(len(slogan_pool))) % len(slogan_pool)]
            hook = self.hooks[(i + rng.randrange(len(self.hooks))) % len(self.hooks)]
            cta = self.ctas[(i + rng.randrange(len(self.ctas))) % len(self.ctas)]
            out.append(f"SPOKEN: {spoken}\nSLOGAN: {slogan}\nHOOK: {hook}\nCTA: {cta}")
        return out


class RemoteBackend:
    """Client for a remote inference endpoint speaking the documented wire
    schema (POST {endpoint}/generate). Safe for concurrent in-flight requests:
    each call issues an independent HTTP request."""

    def __init__(self, endpoint: str, timeout_s: float = 30.0):
        self.endpoint = endpoint.rstrip("/")
        self.timeout_s = timeout_s

    def generate(self, prompt: str, sampling: SamplingParams) -> list[str]:
        payload = {
            "prompt": prompt,
            "temperature": sampling.temperature,
            "top_p": sampling.top_p,
            "repetition_penalty": sampling.repetition_penalty,
            "candidates": sampling.candidates,
        }
        try:
            resp = requests.post(f"{self.endpoint}/generate", json=payload, timeout=self.timeout_s)
            resp.raise_for_status()
            body = resp.json()
        except requests.RequestException as exc:
            raise GenerationError(f"generation backend unreachable: {exc}") from exc
        candidates = body.get("candidates")
        if not isinstance(candidates, list):
            raise GenerationError("malformed backend reply: no candidates list")
        if len(candidates) < sampling.candidates:
            raise GenerationError(
                f"backend returned {len(candidates)} of {sampling.candidates} candidates",
                partial=[str(c) for c in candidates],
            )
        return [str(c) for c in candidates[: sampling.candidates]]


def generate_candidates(req: GenerationRequest, backend: GenerationBackend) -> list[str]:
    """Assemble the prompt and fetch exactly req.sampling.candidates raw outputs."""
    prompt = assemble_prompt(req)
    candidates = backend.generate(prompt, req.sampling)
    if len(candidates) != req.sampling.candidates:
        raise GenerationError(
            f"backend produced {len(candidates)} candidates, expected {req.sampling.candidates}",
            partial=candidates,
        )
    return candidates
