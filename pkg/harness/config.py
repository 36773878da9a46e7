"""
Configuration Files
===================

Plain-text key=value files with dotted sections:

    # comment
    model.dstt.alpha = 1/4
    model.stage_channels = 128,128,128
    train.lr0 = 0.05

Layers are applied in order: defaults, file, `--set key=value` overrides,
then the explicit CLI flags. Aliases `model.alpha` and `model.gamma` stand
for `model.dstt.alpha` and `model.dstt.gamma`. When `model.stage_channels` is
not given anywhere, every stage width follows `model.dstt.c_e`.
"""

from __future__ import annotations

from collections.abc import Callable, Iterable
from pathlib import Path
from typing import Any

from common.exceptions import ConfigError
from common.types import DsttConfig, DType, Modality, ModelConfig, TopologyMode, TrainConfig
from common.utils import fit_heads, fraction_literal

DEFAULT_CONFIG = "default"

ALIASES = {
    "model.alpha": "model.dstt.alpha",
    "model.gamma": "model.dstt.gamma",
}

_TRUE = ("1", "true", "yes", "on")
_FALSE = ("0", "false", "no", "off")


# ============================================================================
# Value Parsers
# ============================================================================


def _parse_int(text: str) -> int:
    return int(text.strip())


def _parse_float(text: str) -> float:
    return fraction_literal(text)


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in _TRUE:
        return True
    if lowered in _FALSE:
        return False
    raise ValueError(f"expected one of {_TRUE + _FALSE}")


def _parse_int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def _parse_str(text: str) -> str:
    if not text.strip():
        raise ValueError("empty value")
    return text.strip()


def _parse_topology(text: str) -> TopologyMode:
    return TopologyMode(text.strip().lower())


def _parse_modality(text: str) -> Modality:
    return Modality(text.strip().lower())


def _parse_dtype(text: str) -> DType:
    return DType.parse(text)


# Canonical keys in dump order
_SCHEMA: dict[str, Callable[[str], Any]] = {
    "model.stage_channels": _parse_int_list,
    "model.stage_blocks": _parse_int_list,
    "model.topology": _parse_topology,
    "model.freeze_epochs": _parse_int,
    "model.num_classes": _parse_int,
    "model.num_joints": _parse_int,
    "model.in_channels": _parse_int,
    "model.head_dropout": _parse_float,
    "model.dilations": _parse_int_list,
    "model.graph": _parse_str,
    "model.dstt.c_e": _parse_int,
    "model.dstt.alpha": _parse_float,
    "model.dstt.s_heads": _parse_int,
    "model.dstt.t_heads": _parse_int,
    "model.dstt.gamma": _parse_int,
    "model.dstt.attn_drop": _parse_float,
    "model.dstt.ff_drop": _parse_float,
    "model.dstt.joint_type": _parse_bool,
    "model.dstt.frame_order": _parse_bool,
    "train.lr0": _parse_float,
    "train.momentum": _parse_float,
    "train.weight_decay": _parse_float,
    "train.epochs": _parse_int,
    "train.milestones": _parse_int_list,
    "train.decay": _parse_float,
    "train.warmup_epochs": _parse_int,
    "train.label_smoothing": _parse_float,
    "train.batch_size": _parse_int,
    "train.seed": _parse_int,
    "train.dtype": _parse_dtype,
    "train.frames": _parse_int,
    "train.modality": _parse_modality,
    "train.early_stop_accuracy": _parse_float,
}


def known_keys() -> list[str]:
    return [*_SCHEMA, *ALIASES]


def canonical_key(key: str) -> str:
    """Resolve aliases and reject unknown keys.

    Raises:
        ConfigError: If the key is unknown (the message names it).
    """
    key = key.strip()
    key = ALIASES.get(key, key)
    if key not in _SCHEMA:
        raise ConfigError(f"Unknown config key '{key}'")
    return key


# ============================================================================
# Parsing
# ============================================================================


def parse_assignments(lines: Iterable[str], source: str = "<overrides>") -> dict[str, Any]:
    """Parse key=value lines into {canonical key: typed value}.

    Blank lines and lines starting with '#' are skipped; a later assignment
    of the same key wins.

    Raises:
        ConfigError: On a line without '=', an unknown key, or a value of the wrong type.
    """
    values: dict[str, Any] = {}
    for line_number, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{line_number}: expected key=value, got '{line}'")
        key, _, text = line.partition("=")
        key = canonical_key(key)
        try:
            values[key] = _SCHEMA[key](text)
        except ValueError as e:
            raise ConfigError(f"{source}:{line_number}: invalid value for '{key}': '{text.strip()}' ({e})") from e
    return values


def read_config_file(path: str | Path | None) -> dict[str, Any]:
    """Typed assignments of a config file; 'default' or None means no file.

    Raises:
        ConfigError: If the file cannot be read or contains an invalid line.
    """
    if path is None or str(path) == DEFAULT_CONFIG:
        return {}
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}") from e
    return parse_assignments(text.splitlines(), str(path))


def _fit_unset_heads(dstt: dict[str, Any]) -> None:
    """Shrink default head counts that do not divide a resized stream.

    Explicitly assigned head counts are left alone so DsttConfig still
    rejects them when they do not divide.
    """
    defaults = DsttConfig()
    c_e = dstt.get("c_e", defaults.c_e)
    alpha = dstt.get("alpha", defaults.alpha)
    c_t = round(alpha * c_e)
    if not 0 < c_t < c_e:
        return
    if "s_heads" not in dstt:
        dstt["s_heads"] = fit_heads(c_e - c_t, defaults.s_heads)
    if "t_heads" not in dstt:
        dstt["t_heads"] = fit_heads(c_t, defaults.t_heads)


def build_configs(values: dict[str, Any]) -> tuple[ModelConfig, TrainConfig]:
    """Turn typed assignments into validated configs (unset keys keep their defaults).

    Raises:
        ConfigError: If a resulting config violates an invariant.
    """
    dstt = {k.removeprefix("model.dstt."): v for k, v in values.items() if k.startswith("model.dstt.")}
    model = {
        k.removeprefix("model."): v
        for k, v in values.items()
        if k.startswith("model.") and not k.startswith("model.dstt.")
    }
    train = {k.removeprefix("train."): v for k, v in values.items() if k.startswith("train.")}

    _fit_unset_heads(dstt)
    dstt_config = DsttConfig(**dstt)
    model.setdefault("stage_channels", [dstt_config.c_e] * 3)
    return ModelConfig(dstt=dstt_config, **model), TrainConfig(**train)


def load_config(
    path: str | Path | None = None,
    overrides: Iterable[str] = (),
    flags: Iterable[str] = (),
) -> tuple[ModelConfig, TrainConfig]:
    """Resolve (ModelConfig, TrainConfig) from a file plus overrides.

    Args:
        path: Config file, or None / "default" for the built-in defaults
        overrides: `key=value` strings from --set, applied over the file
        flags: `key=value` strings derived from dedicated CLI flags, applied last

    Raises:
        ConfigError: On an unknown key, a type mismatch or an invariant violation.
    """
    values = read_config_file(path)
    values.update(parse_assignments(overrides, "--set"))
    values.update(parse_assignments(flags, "<flags>"))
    return build_configs(values)


# ============================================================================
# Emission
# ============================================================================


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    if hasattr(value, "value"):
        return str(value.value)
    return str(value)


def config_values(model: ModelConfig, train: TrainConfig) -> dict[str, Any]:
    """{canonical key: value} of resolved configs, in dump order."""
    sources = {
        "model.dstt.": model.dstt,
        "model.": model,
        "train.": train,
    }
    values: dict[str, Any] = {}
    for key in _SCHEMA:
        prefix = next(p for p in sources if key.startswith(p))
        values[key] = getattr(sources[prefix], key.removeprefix(prefix))
    return values


def dump_config(model: ModelConfig, train: TrainConfig) -> str:
    """Resolved configs as a key=value file that load_config reads back to the same configs."""
    lines = [f"{key}={_format_value(value)}" for key, value in config_values(model, train).items()]
    return "\n".join(lines) + "\n"
