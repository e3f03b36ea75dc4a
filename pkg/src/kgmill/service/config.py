"""Application configuration: YAML file plus environment overrides.

Environment variables (all optional) override file values:
    KGMILL_STORE_PATH, KGMILL_PROVIDER, KGMILL_TRANSCRIPT,
    KGMILL_PROVIDER_POLICY, KGMILL_STRUCTURED_OUTPUT,
    KGMILL_EMBEDDER, KGMILL_EMBEDDER_MODEL, KGMILL_EMBEDDER_DIM,
    KGMILL_EMBEDDER_LOOKUP, KGMILL_PRICE_PROMPT, KGMILL_PRICE_COMPLETION,
    KGMILL_DOLLAR_LIMIT, KGMILL_MODEL, KGMILL_TEMPERATURE, KGMILL_MAX_TOKENS,
    KGMILL_REPORTS_DIR
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from kgmill.errors import ConfigError


@dataclass
class AppConfig:
    store_path: str = "kgmill.db"
    provider: str = "replay"  # "replay" or a "module:factory" dotted path
    transcript: str | None = None
    provider_policy: str = "error"
    structured_output: bool = True
    embedder: str = "fixture"  # "fixture" or a "module:factory" dotted path
    embedder_model: str = "fixture-16"
    embedder_dim: int = 16
    embedder_lookup: str | None = None
    price_prompt: str = "0"
    price_completion: str = "0"
    dollar_limit: str | None = None
    model: str | None = None
    temperature: float = 0.0
    max_tokens: int | None = None
    reports_dir: str | None = None
    host: str = "127.0.0.1"
    port: int = 8646


_ENV_KEYS = {
    "KGMILL_STORE_PATH": ("store_path", str),
    "KGMILL_PROVIDER": ("provider", str),
    "KGMILL_TRANSCRIPT": ("transcript", str),
    "KGMILL_PROVIDER_POLICY": ("provider_policy", str),
    "KGMILL_STRUCTURED_OUTPUT": ("structured_output", lambda v: v not in ("0", "false", "no")),
    "KGMILL_EMBEDDER": ("embedder", str),
    "KGMILL_EMBEDDER_MODEL": ("embedder_model", str),
    "KGMILL_EMBEDDER_DIM": ("embedder_dim", int),
    "KGMILL_EMBEDDER_LOOKUP": ("embedder_lookup", str),
    "KGMILL_PRICE_PROMPT": ("price_prompt", str),
    "KGMILL_PRICE_COMPLETION": ("price_completion", str),
    "KGMILL_DOLLAR_LIMIT": ("dollar_limit", str),
    "KGMILL_MODEL": ("model", str),
    "KGMILL_TEMPERATURE": ("temperature", float),
    "KGMILL_MAX_TOKENS": ("max_tokens", int),
    "KGMILL_REPORTS_DIR": ("reports_dir", str),
    "KGMILL_HOST": ("host", str),
    "KGMILL_PORT": ("port", int),
}


def load_app_config(path: str | Path | None = None,
                    env: dict | None = None) -> AppConfig:
    config = AppConfig()
    if path is not None:
        try:
            raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file {path} is not valid YAML: {exc}")
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {path} must hold a mapping")
        for key, value in raw.items():
            if not hasattr(config, key):
                raise ConfigError(f"unknown config key {key!r} in {path}")
            setattr(config, key, value)
    env = os.environ if env is None else env
    for env_key, (attr, cast) in _ENV_KEYS.items():
        if env_key in env:
            try:
                setattr(config, attr, cast(env[env_key]))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {env_key}: {exc}")
    return config
