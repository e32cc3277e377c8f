"""Engine configuration with flags > file > environment > defaults precedence.

Only the remote-model settings come from the environment
(``OPAL_LLM_ENDPOINT``, ``OPAL_LLM_API_KEY``, ``OPAL_LLM_MODEL``); every
other knob defaults here and is overridden by a JSON config file and then
by command-line flags.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path

DEFAULT_PLANNER_MODEL = "gpt-4-1106-preview"

BACKENDS = ("mock", "rules", "remote")

ENV_ENDPOINT = "OPAL_LLM_ENDPOINT"
ENV_API_KEY = "OPAL_LLM_API_KEY"
ENV_MODEL = "OPAL_LLM_MODEL"


class ConfigError(Exception):
    """A configuration value or file is invalid."""


@dataclass(frozen=True)
class EngineConfig:
    backend: str = "rules"
    fixtures_path: str | None = None
    max_revisions: int = 10
    max_restarts: int = 2
    demo_k: int = 20
    link_threshold: float = 0.85
    categorical_k: int = 12
    seed: int = 0
    exec_timeout_s: float = 300.0
    parallelism: int = 1
    llm_endpoint: str | None = None
    llm_api_key: str | None = None
    llm_model: str = DEFAULT_PLANNER_MODEL

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ConfigError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.max_revisions < 0 or self.max_restarts < 0:
            raise ConfigError("revision and restart budgets cannot be negative")
        for name in ("demo_k", "categorical_k", "parallelism"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.exec_timeout_s <= 0:
            raise ConfigError("exec_timeout_s must be positive")
        if not 0.0 < self.link_threshold <= 1.0:
            raise ConfigError("link_threshold must be in (0, 1]")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_FIELD_NAMES = {f.name for f in fields(EngineConfig)}

# Fields whose values arrive as text (flags, file) but are numeric.
_INT_FIELDS = {"max_revisions", "max_restarts", "demo_k", "categorical_k", "seed", "parallelism"}
_FLOAT_FIELDS = {"link_threshold", "exec_timeout_s"}


def _coerce(name: str, value):
    if value is None:
        return None
    if name in _INT_FIELDS:
        return int(value)
    if name in _FLOAT_FIELDS:
        return float(value)
    return value


def resolve_config(
    flags: dict | None = None,
    config_file: str | Path | None = None,
    env: dict | None = None,
) -> EngineConfig:
    """The effective configuration under the documented precedence.

    ``flags`` entries with value ``None`` are treated as "not given" so an
    argparse namespace can be passed through wholesale.
    """
    environment = os.environ if env is None else env
    values: dict = {}
    for env_name, field_name in (
        (ENV_ENDPOINT, "llm_endpoint"),
        (ENV_API_KEY, "llm_api_key"),
        (ENV_MODEL, "llm_model"),
    ):
        if environment.get(env_name):
            values[field_name] = environment[env_name]

    if config_file is not None:
        path = Path(config_file)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except OSError as err:
            raise ConfigError(f"cannot read config file {path}: {err.strerror or err}")
        except json.JSONDecodeError as err:
            raise ConfigError(f"config file {path} is not valid JSON: {err.msg}")
        if not isinstance(doc, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        unknown = set(doc) - _FIELD_NAMES
        if unknown:
            raise ConfigError(f"unknown config keys in {path}: {sorted(unknown)}")
        values.update(doc)

    for name, value in (flags or {}).items():
        if name in _FIELD_NAMES and value is not None:
            values[name] = value

    try:
        return EngineConfig(**{k: _coerce(k, v) for k, v in values.items()})
    except TypeError as err:
        raise ConfigError(str(err))
