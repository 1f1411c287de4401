"""Configuration loading: packaged defaults, optional user file, env overrides."""
from __future__ import annotations

import copy
import os
from pathlib import Path
from typing import Any, Optional

import yaml

_DEFAULTS_PATH = Path(__file__).parent / "data" / "defaults.yaml"

# Environment overrides for the service block, all optional.
_ENV_MAP = {
    "LIVEHOST_LISTEN_HOST": ("service", "listen_host", str),
    "LIVEHOST_DIALOGUE_PORT": ("service", "dialogue_port", int),
    "LIVEHOST_MEDIA_PORT": ("service", "media_port", int),
    "LIVEHOST_BACKEND_ENDPOINT": ("service", "backend_endpoint", str),
    "LIVEHOST_MEDIA_ENDPOINT": ("service", "media_endpoint", str),
    "LIVEHOST_CATALOGUE": ("service", "catalogue_path", str),
    "LIVEHOST_EVENT_LOG_DIR": ("service", "event_log_dir", str),
    "LIVEHOST_STUB_SEED": ("service", "stub_seed", int),
    "LIVEHOST_HOLD_MS": ("session", "hold_period_ms", int),
    "LIVEHOST_QUEUE_CAPACITY": ("session", "comment_queue_capacity", int),
    "LIVEHOST_SPEAKING_RATE": ("session", "speaking_rate_cps", float),
}


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: Optional[str | Path] = None, env: Optional[dict[str, str]] = None) -> dict[str, Any]:
    """Packaged defaults, overlaid with an optional YAML file and LIVEHOST_* vars."""
    cfg = yaml.safe_load(_DEFAULTS_PATH.read_text(encoding="utf-8"))
    if path:
        user = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        if not isinstance(user, dict):
            raise ValueError(f"config file {path} must contain a mapping")
        cfg = _deep_merge(cfg, user)
    env = os.environ if env is None else env
    for var, (section, key, cast) in _ENV_MAP.items():
        if var in env:
            cfg.setdefault(section, {})[key] = cast(env[var])
    return cfg


def default_config() -> dict[str, Any]:
    return load_config()
