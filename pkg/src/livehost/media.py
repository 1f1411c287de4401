"""Synthesis and asset plumbing shared by the session machine and the media
service. The stub synthesizer is content-addressed and fully deterministic;
real TTS engines plug in behind the same contract."""
from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol

import requests

DEFAULT_SPEAKING_RATE_CPS = 4.0


class UnknownAssetError(LookupError):
    pass


@dataclass(frozen=True)
class SynthesisResult:
    asset_id: str
    duration_ms: int
    text_hash: str


class Synthesizer(Protocol):
    def synthesize(self, text: str) -> SynthesisResult: ...


def speech_duration_ms(text: str, chars_per_second: float = DEFAULT_SPEAKING_RATE_CPS) -> int:
    """ceil(characters / rate) whole seconds, expressed in milliseconds."""
    if chars_per_second <= 0:
        raise ValueError("speaking rate must be positive")
    return math.ceil(len(text) / chars_per_second) * 1000


def _silence_wav(total_bytes: int = 1024) -> bytes:
    """Tiny valid mono 16-bit 8 kHz WAV of silence, padded to total_bytes."""
    data_len = max(total_bytes - 44, 2)
    header = b"RIFF" + struct.pack("<I", 36 + data_len) + b"WAVEfmt "
    header += struct.pack("<IHHIIHH", 16, 1, 1, 8000, 16000, 2, 16)
    header += b"data" + struct.pack("<I", data_len)
    return header + b"\x00" * data_len


_PLACEHOLDER_WAV = _silence_wav()


class StubSynthesizer:
    """Deterministic synthesizer: duration from the speaking-rate formula, a
    1 KB placeholder WAV per asset, asset ids derived from the text digest."""

    def __init__(self, chars_per_second: float = DEFAULT_SPEAKING_RATE_CPS):
        self.chars_per_second = chars_per_second
        self._assets: dict[str, bytes] = {}

    def synthesize(self, text: str) -> SynthesisResult:
        if not text.strip():
            raise ValueError("cannot synthesize empty text")
        digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
        asset_id = "a" + digest[:16]
        self._assets[asset_id] = _PLACEHOLDER_WAV
        return SynthesisResult(
            asset_id=asset_id,
            duration_ms=speech_duration_ms(text, self.chars_per_second),
            text_hash=digest,
        )

    def asset(self, asset_id: str) -> tuple[bytes, str]:
        try:
            return self._assets[asset_id], "audio/wav"
        except KeyError:
            raise UnknownAssetError(asset_id) from None


class RemoteSynthClient:
    """Client for a deployed media service speaking the documented wire schema."""

    def __init__(self, endpoint: str, timeout_s: float = 10.0):
        self.endpoint = endpoint.rstrip("/")
        self.timeout_s = timeout_s

    def synthesize(self, text: str) -> SynthesisResult:
        resp = requests.post(f"{self.endpoint}/synthesize", json={"text": text},
                             timeout=self.timeout_s)
        resp.raise_for_status()
        body = resp.json()
        return SynthesisResult(
            asset_id=str(body["asset_id"]),
            duration_ms=int(body["duration_ms"]),
            text_hash=str(body["text_hash"]),
        )

    def asset(self, asset_id: str) -> tuple[bytes, str]:
        resp = requests.get(f"{self.endpoint}/assets/{asset_id}", timeout=self.timeout_s)
        if resp.status_code == 404:
            raise UnknownAssetError(asset_id)
        resp.raise_for_status()
        return resp.content, resp.headers.get("content-type", "application/octet-stream")


def default_image_dir() -> Path:
    return Path(__file__).parent / "data" / "images"


def product_image(routing_id: int, image_dir: Optional[Path] = None) -> bytes:
    """Static product image keyed by routing id; routing ids live on this
    internal wire only, never in generated text."""
    directory = image_dir or default_image_dir()
    path = directory / f"{routing_id}.png"
    if not path.is_file():
        raise UnknownAssetError(str(routing_id))
    return path.read_bytes()
