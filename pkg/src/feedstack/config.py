"""Service configuration: defaults, JSON config file, environment overlay.

The config file is a JSON object; every key is optional:

    {
      "port": 8765,
      "storage_dir": "./feedstack-data",
      "catalog_path": "",
      "gateway": {
        "mode": "stub",
        "endpoint": "",
        "api_key_ref": "FEEDSTACK_LLM_API_KEY",
        "timeout_ms": 10000,
        "max_retries": 2
      }
    }

An empty catalog_path means the shipped default catalog.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Union

from .gateway import GatewayConfig
from .model import FeedstackError, ValidationError


class ConfigError(FeedstackError):
    """The config file is unreadable or contains bad values."""


DEFAULT_PORT = 8765
DEFAULT_STORAGE_DIR = "./feedstack-data"


@dataclass(frozen=True)
class ServiceConfig:
    port: int = DEFAULT_PORT
    storage_dir: str = DEFAULT_STORAGE_DIR
    catalog_path: str = ""
    gateway: GatewayConfig = field(default_factory=GatewayConfig)


def _gateway_from_dict(data: dict[str, Any]) -> GatewayConfig:
    allowed = {"mode", "endpoint", "api_key_ref", "timeout_ms", "max_retries", "backoff_base_ms"}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown gateway config keys: {sorted(unknown)}")
    try:
        return GatewayConfig(**data)
    except (TypeError, ValidationError) as exc:
        raise ConfigError(f"bad gateway config: {exc}") from exc


def parse_config(data: dict[str, Any]) -> ServiceConfig:
    if not isinstance(data, dict):
        raise ConfigError("config document must be a JSON object")
    allowed = {"port", "storage_dir", "catalog_path", "gateway"}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    port = data.get("port", DEFAULT_PORT)
    if not isinstance(port, int) or isinstance(port, bool) or not (0 < port < 65536):
        raise ConfigError(f"port must be an integer in 1..65535, got {port!r}")
    storage_dir = data.get("storage_dir", DEFAULT_STORAGE_DIR)
    if not isinstance(storage_dir, str) or not storage_dir:
        raise ConfigError("storage_dir must be a non-empty string")
    catalog_path = data.get("catalog_path", "")
    if not isinstance(catalog_path, str):
        raise ConfigError("catalog_path must be a string")
    gateway_data = data.get("gateway", {})
    if not isinstance(gateway_data, dict):
        raise ConfigError("gateway section must be an object")
    return ServiceConfig(
        port=port,
        storage_dir=storage_dir,
        catalog_path=catalog_path,
        gateway=_gateway_from_dict(gateway_data),
    )


def load_config(path: Union[str, Path]) -> ServiceConfig:
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    return parse_config(data)
