"""Flat `key = value` config files with typed, closed schemas.

One key per line, full-line comments start with '#', blank lines are
ignored. Every command declares the exact keys it accepts; unknown keys are
errors so a typo in an experiment config fails loudly instead of silently
training with a default.

The STACKNET_SEED environment variable overrides any `seed` key
(precedence: environment > config file > schema default).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from .errors import ConfigError

ENV_SEED = "STACKNET_SEED"


@dataclass(frozen=True)
class Key:
    """Schema entry for one config key."""

    kind: str  # int | float | bool | str | int_list | choice
    default: object = None
    required: bool = False
    choices: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("int", "float", "bool", "str", "int_list", "choice"):
            raise ValueError(f"bad schema kind {self.kind!r}")
        if self.kind == "choice" and not self.choices:
            raise ValueError("choice keys need a choices tuple")


def _convert(name: str, raw: str, key: Key):
    if key.kind == "int":
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"key {name!r}: expected an integer, got {raw!r}")
    if key.kind == "float":
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"key {name!r}: expected a number, got {raw!r}")
    if key.kind == "bool":
        if raw == "true":
            return True
        if raw == "false":
            return False
        raise ConfigError(f"key {name!r}: expected true or false, got {raw!r}")
    if key.kind == "int_list":
        parts = [p.strip() for p in raw.split(",")]
        if not all(parts):
            raise ConfigError(
                f"key {name!r}: expected comma-separated integers, got {raw!r}"
            )
        try:
            return [int(p) for p in parts]
        except ValueError:
            raise ConfigError(
                f"key {name!r}: expected comma-separated integers, got {raw!r}"
            )
    if key.kind == "choice":
        if raw not in key.choices:
            raise ConfigError(
                f"key {name!r}: expected one of {', '.join(key.choices)}, got {raw!r}"
            )
    return raw


def parse_config_text(text: str, schema: dict[str, Key],
                      source: str = "<config>") -> tuple[dict, set[str]]:
    """Parse config text against a schema.

    Returns (values, present): `values` holds every schema key (defaults
    filled in), `present` the keys the file actually set.
    """
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        name, _, value = stripped.partition("=")
        name = name.strip()
        value = value.strip()
        if not name:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if name in raw:
            raise ConfigError(f"{source}:{lineno}: duplicate key {name!r}")
        raw[name] = value

    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(
            f"{source}: unknown config key(s): {', '.join(unknown)}"
        )
    missing = sorted(
        name for name, key in schema.items() if key.required and name not in raw
    )
    if missing:
        raise ConfigError(f"{source}: missing required key(s): {', '.join(missing)}")

    values: dict = {}
    for name, key in schema.items():
        if name in raw:
            values[name] = _convert(name, raw[name], key)
        else:
            values[name] = key.default
    return values, set(raw)


def load_config(path, schema: dict[str, Key]) -> tuple[dict, set[str]]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror or e}")
    return parse_config_text(text, schema, source=str(path))


def env_seed() -> int | None:
    """Seed override from the environment, validated; None if unset."""
    raw = os.environ.get(ENV_SEED)
    if raw is None:
        return None
    try:
        seed = int(raw)
    except ValueError:
        raise ConfigError(f"{ENV_SEED} must be an integer, got {raw!r}")
    if not 0 <= seed < 2**64:
        raise ConfigError(f"{ENV_SEED} must be a 64-bit unsigned integer, got {seed}")
    return seed


def apply_env_seed(values: dict) -> dict:
    """Overrides values['seed'] when STACKNET_SEED is set."""
    seed = env_seed()
    if seed is not None and "seed" in values:
        values["seed"] = seed
    return values
