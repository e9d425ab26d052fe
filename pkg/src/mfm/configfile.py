"""Flat key-value config files with dotted section keys.

Format, one assignment per line:

    # comment
    model.alpha = 2.0
    prior.kind = "geometric"
    sweep.sizes = [50, 200, 1000]

Values are parsed as JSON when possible (numbers, quoted strings, booleans,
lists); anything else is kept as a bare string. Keys outside the caller's
registry, duplicate keys, and lines without '=' are errors — silent typos in
experiment configs are worse than loud ones.
"""

from __future__ import annotations

import json

__all__ = ["ConfigError", "parse_config", "check_keys"]


class ConfigError(ValueError):
    pass


def parse_config(text: str) -> dict:
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def check_keys(cfg: dict, known: set[str]) -> None:
    unknown = sorted(k for k in cfg if k not in known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
