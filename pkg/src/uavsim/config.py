"""INI configuration files mapped onto the study parameter dataclasses."""

from __future__ import annotations

import configparser
import dataclasses
from pathlib import Path

from .exceptions import ConfigError

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def parse_config(text: str, source: str = "<string>") -> configparser.ConfigParser:
    """Parse INI text. Keys are case-sensitive."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    return cp


def read_config(path: str | Path) -> tuple[configparser.ConfigParser, str]:
    """Parse an INI file; returns the parser and the raw text."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    return parse_config(text, str(path)), text


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_like(text: str, default):
    """Convert ``text`` to the type of ``default``."""
    t = text.strip()
    if isinstance(default, bool):
        return _parse_bool(t)
    if isinstance(default, int):
        return int(float(t)) if float(t).is_integer() else int(t)
    if isinstance(default, float):
        return float(t)
    if isinstance(default, tuple):
        parts = [p for p in t.replace(";", ",").split(",") if p.strip()]
        if default and all(isinstance(x, tuple) for x in default):
            return tuple(tuple(float(v) for v in p.split("/")) for p in parts)
        kinds = [type(x) for x in default] or [float]
        kind = kinds[0]
        return tuple(kind(float(p)) if kind is int else kind(p.strip()) for p in parts)
    if default is None:
        if t.lower() in ("none", ""):
            return None
        return int(t) if t.lstrip("-").isdigit() else float(t)
    return t


def params_from_section(cls, section, **overrides):
    """Build dataclass ``cls`` from the string mapping ``section``.

    Values are coerced to the type of each field's default; unknown keys
    are rejected.
    """
    fields = {f.name: f for f in dataclasses.fields(cls) if f.init}
    kw = {}
    for key, text in dict(section or {}).items():
        if key not in fields:
            raise ConfigError(f"{cls.__name__}: unknown key {key!r}")
        f = fields[key]
        default = f.default if f.default is not dataclasses.MISSING else None
        if dataclasses.is_dataclass(default):
            raise ConfigError(f"{cls.__name__}: {key!r} is set through its own section")
        try:
            kw[key] = _parse_like(text, default)
        except ValueError as exc:
            raise ConfigError(f"{cls.__name__}.{key}: {exc}") from exc
    kw.update(overrides)
    try:
        return cls(**kw)
    except TypeError as exc:
        raise ConfigError(f"{cls.__name__}: {exc}") from exc


def section(cp: configparser.ConfigParser, name: str) -> dict[str, str]:
    return dict(cp[name]) if cp.has_section(name) else {}
