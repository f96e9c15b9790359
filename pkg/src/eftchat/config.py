"""Application configuration: one TOML file, overridable by environment.

Every knob the service and CLI need lives here: bind address, provider
selection, prompt directory, store root and moderation mode. Environment
variables (prefix ``EFTCHAT_``) win over the file.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["ConfigError", "AppConfig", "load_config"]

ENV_PREFIX = "EFTCHAT_"


class ConfigError(Exception):
    pass


@dataclass
class AppConfig:
    host: str = "127.0.0.1"
    port: int = 8787
    provider: str = "echo"  # echo | scripted | remote
    provider_script: str | None = None
    endpoint_url: str | None = None
    model_name: str = "gpt-4"
    credential_env: str = "EFTCHAT_API_KEY"
    prompt_dir: str | None = None
    store_root: str = "./sessions"
    moderation_mode: str = "local"  # local | remote
    moderation_endpoint: str | None = None
    deny_list_path: str | None = None
    cors_origin: str | None = None
    static_dir: str | None = None

    def validate(self) -> None:
        if self.provider not in ("echo", "scripted", "remote"):
            raise ConfigError(f"unknown provider kind {self.provider!r}")
        if self.provider == "scripted" and not self.provider_script:
            raise ConfigError("scripted provider requires provider_script")
        if self.provider == "remote" and not self.endpoint_url:
            raise ConfigError("remote provider requires endpoint_url")
        if self.moderation_mode not in ("local", "remote"):
            raise ConfigError(f"unknown moderation mode {self.moderation_mode!r}")
        if self.moderation_mode == "remote" and not self.moderation_endpoint:
            raise ConfigError("remote moderation requires moderation_endpoint")
        if not 0 < self.port < 65536:
            raise ConfigError(f"port out of range: {self.port}")


def load_config(
    path: str | Path | None = None, env: Mapping[str, str] | None = None
) -> AppConfig:
    env = os.environ if env is None else env
    values: dict[str, Any] = {}
    if path is not None:
        config_path = Path(path)
        if not config_path.exists():
            raise ConfigError(f"config file not found: {config_path}")
        try:
            values.update(tomllib.loads(config_path.read_text(encoding="utf-8")))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {config_path}: {exc}") from exc
    known = {f.name: f for f in fields(AppConfig)}
    unknown = set(values) - set(known)
    if unknown:
        raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
    for name in known:
        env_key = ENV_PREFIX + name.upper()
        if env_key in env:
            values[name] = env[env_key]
    if "port" in values:
        try:
            values["port"] = int(values["port"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"port must be an integer: {values['port']!r}") from exc
    config = AppConfig(**values)
    config.validate()
    return config
