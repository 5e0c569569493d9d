"""Run configuration: one flat dataclass, a key = value file format, and
flag/file resolution.  Command-line flags override file values; unknown keys
are rejected; every run logs the fully-resolved configuration and the logged
form reparses to an equal Config.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass


class ConfigError(ValueError):
    pass


@dataclass
class Config:
    # decoding / training
    decoder: str = "inorder"
    history: str = "none"
    explore: bool = False
    epochs: int = 10
    seed: int = 1
    dev_every: int = 1
    stop_on_zero_loss: bool = False
    unk_z: float = 0.8375
    rho: float = 0.99
    eps: float = 1e-7
    oracle_interpretation: str = "strict"
    # history tracker ablation: inputs (label embedding / span representation)
    # and which predictions consume the state (labels / spans)
    history_label_emb: bool = True
    history_span_rep: bool = True
    history_for_label: bool = True
    history_for_span: bool = True
    # model dimensions
    word_dim: int = 100
    tag_dim: int = 50
    char_emb_dim: int = 50
    char_out_dim: int = 50
    hidden_dim: int = 250
    scorer_hidden_dim: int = 250
    history_dim: int = 250
    label_emb_dim: int = 50
    dropout: float = 0.4

    def __post_init__(self):
        if self.decoder not in ("cky", "topdown", "inorder"):
            raise ConfigError(f"unknown decoder {self.decoder!r}")
        if self.history not in ("none", "chain", "stack"):
            raise ConfigError(f"unknown history variant {self.history!r}")
        if self.history != "none" and self.decoder == "cky":
            raise ConfigError("the cky decoder cannot track decision history")
        if self.history != "none" and not (self.history_label_emb or self.history_span_rep):
            raise ConfigError("history tracking needs at least one input source")
        if self.oracle_interpretation not in ("strict", "inclusive"):
            raise ConfigError(f"unknown oracle interpretation {self.oracle_interpretation!r}")
        if not 0.0 < self.rho < 1.0:
            raise ConfigError(f"rho must be in (0, 1), got {self.rho}")
        if self.eps <= 0.0:
            raise ConfigError(f"eps must be positive, got {self.eps}")
        if self.unk_z < 0.0:
            raise ConfigError(f"unk_z must be non-negative, got {self.unk_z}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.epochs < 0 or self.dev_every < 1 or self.seed < 0:
            raise ConfigError("epochs must be >= 0, dev_every >= 1, seed >= 0")


_FIELDS = {f.name: f for f in dataclasses.fields(Config)}


def _parse_value(name, text):
    kind = _FIELDS[name].type
    text = text.strip()
    if kind == "bool":
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"bad boolean for {name}: {text!r}")
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {text!r}") from exc
    return text


def parse_config_text(text):
    """Parse `key = value` lines (comments with '#') into a dict."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        values[key] = _parse_value(key, value)
    return values


def read_config_file(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def resolve_config(file_values=None, overrides=None):
    """Merge config-file values with flag overrides (flags win)."""
    merged = {}
    merged.update(file_values or {})
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        merged[key] = value
    return Config(**merged)


def format_config(cfg):
    """Render a Config as key = value lines; reparses to an equal Config."""
    lines = []
    for f in dataclasses.fields(Config):
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
