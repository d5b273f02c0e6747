"""Service configuration: JSON config file plus environment overrides.

Environment variables (LISTEN_ADDR, TOKEN_ISSUER_KEYS, BACKEND_MODE,
REMOTE_ENDPOINT, REMOTE_KEY, RATE_CAPACITY, RATE_REFILL, CONTEXT_DECAY,
CONTEXT_CAP) override file values. TOKEN_ISSUER_KEYS uses
"issuer=key[,issuer2=key2]" in the environment and an object in the file.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional

from .auth import LOCAL_TEST_ISSUER, LOCAL_TEST_KEY


class ConfigError(ValueError):
    """Invalid configuration; message starts with the field path."""


@dataclass
class ServiceConfig:
    listen_addr: str = "127.0.0.1:8600"
    token_issuer_keys: Dict[str, str] = field(default_factory=dict)
    backend_mode: str = "grammar"
    remote_endpoint: str = ""
    remote_key: str = ""
    rate_capacity: float = 30.0
    rate_refill: float = 10.0  # tokens per minute
    context_decay: float = 0.5
    context_cap: int = 12
    storage_dir: Optional[str] = None
    lexicon_files: List[str] = field(default_factory=list)

    def host_port(self):
        host, _, port = self.listen_addr.rpartition(":")
        if not host or not port.isdigit():
            raise ConfigError("listen_addr: expected host:port")
        return host, int(port)


_FILE_KEYS = {
    "listen_addr", "token_issuer_keys", "backend_mode", "remote_endpoint",
    "remote_key", "rate_capacity", "rate_refill", "context_decay",
    "context_cap", "storage_dir", "lexicon_files",
}


def load_config(path: Optional[str] = None,
                env: Optional[Mapping[str, str]] = None) -> ServiceConfig:
    env = os.environ if env is None else env
    cfg = ServiceConfig()
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config: file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config: expected a JSON object")
        for key in raw:
            if key not in _FILE_KEYS:
                raise ConfigError(f"{key}: unknown config field")
        _apply_file(cfg, raw)
    _apply_env(cfg, env)
    _validate(cfg)
    if not cfg.token_issuer_keys:
        # hermetic default: the local development issuer
        cfg.token_issuer_keys = {LOCAL_TEST_ISSUER: LOCAL_TEST_KEY}
    return cfg


def _apply_file(cfg: ServiceConfig, raw: dict):
    if "listen_addr" in raw:
        cfg.listen_addr = _expect_str(raw, "listen_addr")
    if "token_issuer_keys" in raw:
        keys = raw["token_issuer_keys"]
        if not isinstance(keys, dict) or \
                not all(isinstance(k, str) and isinstance(v, str)
                        for k, v in keys.items()):
            raise ConfigError("token_issuer_keys: expected {issuer: key}")
        cfg.token_issuer_keys = dict(keys)
    if "backend_mode" in raw:
        cfg.backend_mode = _expect_str(raw, "backend_mode")
    if "remote_endpoint" in raw:
        cfg.remote_endpoint = _expect_str(raw, "remote_endpoint")
    if "remote_key" in raw:
        cfg.remote_key = _expect_str(raw, "remote_key")
    if "rate_capacity" in raw:
        cfg.rate_capacity = _expect_num(raw, "rate_capacity")
    if "rate_refill" in raw:
        cfg.rate_refill = _expect_num(raw, "rate_refill")
    if "context_decay" in raw:
        cfg.context_decay = _expect_num(raw, "context_decay")
    if "context_cap" in raw:
        if not isinstance(raw["context_cap"], int):
            raise ConfigError("context_cap: must be an integer")
        cfg.context_cap = raw["context_cap"]
    if "storage_dir" in raw:
        cfg.storage_dir = _expect_str(raw, "storage_dir")
    if "lexicon_files" in raw:
        files = raw["lexicon_files"]
        if not isinstance(files, list) or \
                not all(isinstance(f, str) for f in files):
            raise ConfigError("lexicon_files: expected a list of paths")
        cfg.lexicon_files = list(files)


def _apply_env(cfg: ServiceConfig, env: Mapping[str, str]):
    if env.get("LISTEN_ADDR"):
        cfg.listen_addr = env["LISTEN_ADDR"]
    if env.get("TOKEN_ISSUER_KEYS"):
        pairs = {}
        for part in env["TOKEN_ISSUER_KEYS"].replace(";", ",").split(","):
            part = part.strip()
            if not part:
                continue
            if "=" not in part:
                raise ConfigError(
                    "TOKEN_ISSUER_KEYS: expected issuer=key[,issuer=key]")
            issuer, _, key = part.partition("=")
            pairs[issuer.strip()] = key.strip()
        cfg.token_issuer_keys = pairs
    if env.get("BACKEND_MODE"):
        cfg.backend_mode = env["BACKEND_MODE"]
    if env.get("REMOTE_ENDPOINT"):
        cfg.remote_endpoint = env["REMOTE_ENDPOINT"]
    if env.get("REMOTE_KEY"):
        cfg.remote_key = env["REMOTE_KEY"]
    if env.get("RATE_CAPACITY"):
        cfg.rate_capacity = _env_num(env, "RATE_CAPACITY")
    if env.get("RATE_REFILL"):
        cfg.rate_refill = _env_num(env, "RATE_REFILL")
    if env.get("CONTEXT_DECAY"):
        cfg.context_decay = _env_num(env, "CONTEXT_DECAY")
    if env.get("CONTEXT_CAP"):
        try:
            cfg.context_cap = int(env["CONTEXT_CAP"])
        except ValueError:
            raise ConfigError("CONTEXT_CAP: must be an integer") from None
    if env.get("STORAGE_DIR"):
        cfg.storage_dir = env["STORAGE_DIR"]


def _validate(cfg: ServiceConfig):
    cfg.host_port()
    if cfg.backend_mode not in ("grammar", "remote"):
        raise ConfigError(
            f"backend_mode: must be 'grammar' or 'remote', got {cfg.backend_mode!r}")
    if cfg.backend_mode == "remote" and not cfg.remote_endpoint:
        raise ConfigError("remote_endpoint: required when backend_mode=remote")
    if cfg.rate_capacity < 1:
        raise ConfigError("rate_capacity: must be >= 1")
    if cfg.rate_refill <= 0:
        raise ConfigError("rate_refill: must be positive")
    if not (0 < cfg.context_decay < 1):
        raise ConfigError("context_decay: must lie in (0, 1)")
    if cfg.context_cap < 1:
        raise ConfigError("context_cap: must be >= 1")


def _expect_str(raw: dict, key: str) -> str:
    if not isinstance(raw[key], str):
        raise ConfigError(f"{key}: must be a string")
    return raw[key]


def _expect_num(raw: dict, key: str) -> float:
    if not isinstance(raw[key], (int, float)):
        raise ConfigError(f"{key}: must be a number")
    return float(raw[key])


def _env_num(env: Mapping[str, str], key: str) -> float:
    try:
        return float(env[key])
    except ValueError:
        raise ConfigError(f"{key}: must be a number") from None
