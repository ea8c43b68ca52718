"""Run configuration: flat key=value files with command-line overrides."""
import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from pydantic import ValidationError

from rbhom.exceptions import ConfigError
from rbhom.types import RunConfig

DEBUG_ENV_FLAG = "RBHOM_DEBUG_LOGS"


def debug_enabled() -> bool:
    return os.environ.get(DEBUG_ENV_FLAG, "").strip().lower() in {"1", "true", "yes"}


def parse_config_text(text: str) -> Dict[str, str]:
    """KEY=VALUE lines; blank lines and # comments are skipped, surrounding quotes stripped."""
    values: Dict[str, str] = {}
    for number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {number}: expected key=value, got {raw_line!r}")

        key, value = line.split("=", 1)
        key = key.strip().lower().replace("-", "_")
        value = value.strip()
        if not key:
            raise ConfigError(f"line {number}: empty key")

        if value and len(value) >= 2 and value[0] == value[-1] and value[0] in {"'", '"'}:
            value = value[1:-1]
        values[key] = value
    return values


def _format_validation_error(exc: ValidationError) -> str:
    messages = []
    for error in exc.errors():
        location = ".".join(str(part) for part in error.get("loc", ())) or "config"
        messages.append(f"{location}: {error.get('msg')}")
    return "; ".join(messages)


def build_config(values: Mapping[str, Any]) -> RunConfig:
    try:
        return RunConfig(**values)
    except ValidationError as exc:
        raise ConfigError(f"invalid configuration: {_format_validation_error(exc)}") from exc


def load_config(
    path: Optional[Union[str, Path]] = None, overrides: Optional[Mapping[str, Any]] = None
) -> RunConfig:
    """
    Merge a config file (if any) with overrides; ``None`` overrides are ignored.

    :raises ConfigError: unreadable file, malformed line, unknown key or invalid value
    """
    values: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        values.update(parse_config_text(text))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    return build_config(values)
