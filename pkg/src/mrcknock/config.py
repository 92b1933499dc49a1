"""Loading experiment configs from flat TOML files."""
from __future__ import annotations

import sys

from .errors import ConfigError, KnockoffError
from .sim import ExperimentConfig

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib


def parse_config(text: str, **overrides) -> ExperimentConfig:
    """Parse TOML text whose keys mirror :class:`ExperimentConfig` fields.

    Keyword overrides (e.g. ``base_seed``) replace file values when not None.
    """
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"config must be flat; found tables {nested}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig.from_mapping(data)
    except (KnockoffError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, **overrides) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, **overrides)
