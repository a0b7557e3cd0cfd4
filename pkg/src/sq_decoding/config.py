from __future__ import annotations

import argparse
import dataclasses
import json
import os
from pathlib import Path
from typing import Any, Callable

from .core import LMS_MODES, InputError, ScoreConfig, SearchConfig
from .nn import AdamState
from .search_sqd import STRATEGIES

CONFIG_ENV = "SQD_CONFIG"
DEFAULT_CONFIG_NAME = "sqd-config.json"


def load_config(config_path: Path) -> dict:
    if not config_path.exists():
        return {}
    try:
        data = json.loads(config_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise InputError(f"Config file {config_path} is not valid JSON: {e}") from e
    except UnicodeDecodeError as e:
        raise InputError(f"Config file {config_path} is not valid UTF-8: {e.reason} at byte {e.start}") from None
    if not isinstance(data, dict):
        raise InputError(f"Config file {config_path} must contain a JSON object")
    return data


def save_config(config_path: Path, config: dict) -> None:
    config_path.parent.mkdir(parents=True, exist_ok=True)
    config_path.write_text(json.dumps(config, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def default_config_path() -> Path | None:
    env = os.environ.get(CONFIG_ENV, "").strip()
    if env:
        return Path(env)
    candidate = Path(DEFAULT_CONFIG_NAME)
    return candidate if candidate.exists() else None


def resolve_config(explicit: Path | None) -> tuple[Path | None, dict]:
    """--config wins over the environment; an explicitly named file must exist."""
    if explicit is not None:
        if not explicit.exists():
            raise InputError(f"Config file not found: {explicit}")
        return explicit, load_config(explicit)
    path = default_config_path()
    return path, (load_config(path) if path is not None else {})


def _section(config: dict, name: str) -> dict:
    sec = config.get(name) or {}
    if not isinstance(sec, dict):
        raise InputError(f"Config section {name!r} must be an object")
    return sec


def _pick(args: argparse.Namespace, attr: str, section: dict, key: str, default: Any, cast: Callable[[Any], Any]) -> Any:
    value = getattr(args, attr, None)
    if value is None:
        value = section.get(key, default)
    if value is None:
        return None
    try:
        return cast(value)
    except (TypeError, ValueError) as e:
        raise InputError(f"Invalid value for {key!r}: {value!r}") from e


def _bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.strip().lower() in ("true", "false", "yes", "no", "1", "0"):
        return value.strip().lower() in ("true", "yes", "1")
    raise ValueError(value)


def normalize_lms_mode(value: Any) -> str:
    mode = str(value).strip().replace("-", "_")
    if mode not in LMS_MODES:
        raise InputError(f"lms_mode must be one of expectation, as-printed; got {value!r}")
    return mode


@dataclasses.dataclass(frozen=True)
class DecodeSettings:
    strategy: str = "sqd"
    beam_size: int = 5
    max_steps: int = 150
    retain_size: int | None = None
    queue_capacity: int | None = None
    lam: float = 1.0
    alpha: float = 0.0
    beta: float = 1.0
    gamma: float = 0.0
    tau: float = 0.0
    lms_mode: str = "expectation"
    pg_enabled: bool = True
    lmp_enabled: bool = False
    seed: int = 0
    trace: bool = False
    timing: bool = False
    jobs: int = 1

    def score_config(self) -> ScoreConfig:
        return ScoreConfig(
            lam=self.lam,
            alpha=self.alpha,
            beta=self.beta,
            gamma=self.gamma,
            tau=self.tau,
            lmp_enabled=self.lmp_enabled,
            pg_enabled=self.pg_enabled,
            lms_mode=self.lms_mode,
        )

    def search_config(self) -> SearchConfig:
        return SearchConfig(
            beam_size=self.beam_size,
            max_steps=self.max_steps,
            retain_size=self.retain_size,
            queue_capacity=self.queue_capacity,
            seed=self.seed,
        )

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        out["lambda"] = out.pop("lam")
        out["retain_size"] = self.search_config().retain_size
        return out


# (namespace attribute, config key, cast)
_DECODE_FIELDS: list[tuple[str, str, Callable[[Any], Any]]] = [
    ("strategy", "strategy", str),
    ("beam_size", "beam_size", int),
    ("max_steps", "max_steps", int),
    ("retain_size", "retain_size", int),
    ("queue_capacity", "queue_capacity", int),
    ("lam", "lambda", float),
    ("alpha", "alpha", float),
    ("beta", "beta", float),
    ("gamma", "gamma", float),
    ("tau", "tau", float),
    ("lms_mode", "lms_mode", normalize_lms_mode),
    ("pg_enabled", "pg_enabled", _bool),
    ("lmp_enabled", "lmp_enabled", _bool),
    ("seed", "seed", int),
    ("trace", "trace", _bool),
    ("timing", "timing", _bool),
    ("jobs", "jobs", int),
]


def resolve_decode_settings(args: argparse.Namespace, config: dict) -> DecodeSettings:
    """Flag > config `decode` section > built-in default."""
    section = _section(config, "decode")
    defaults = DecodeSettings()
    values = {attr: _pick(args, attr, section, key, getattr(defaults, attr), cast) for attr, key, cast in _DECODE_FIELDS}
    if values["jobs"] < 1:
        raise InputError(f"jobs must be >= 1, got {values['jobs']}")
    if values["strategy"] not in STRATEGIES:
        raise InputError(f"strategy must be one of {', '.join(STRATEGIES)}; got {values['strategy']!r}")
    settings = DecodeSettings(**values)
    # Validates ranges early so bad flags surface as input errors.
    settings.score_config()
    settings.search_config()
    return settings


@dataclasses.dataclass(frozen=True)
class TrainSettings:
    epochs: int
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    hidden_size: int = 16
    seed: int = 0
    max_steps: int = 150

    def adam(self) -> AdamState:
        return AdamState(lr=self.lr, beta1=self.beta1, beta2=self.beta2, eps=self.eps)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


TRAIN_DEFAULTS = {
    "train_lmp": TrainSettings(epochs=2, lr=1e-4),
    "train_model": TrainSettings(epochs=10, lr=1e-2),
}

_TRAIN_FIELDS: list[tuple[str, str, Callable[[Any], Any]]] = [
    ("epochs", "epochs", int),
    ("lr", "lr", float),
    ("beta1", "beta1", float),
    ("beta2", "beta2", float),
    ("eps", "eps", float),
    ("hidden_size", "hidden_size", int),
    ("seed", "seed", int),
    ("max_steps", "max_steps", int),
]


def resolve_train_settings(args: argparse.Namespace, config: dict, section_name: str) -> TrainSettings:
    section = _section(config, section_name)
    defaults = TRAIN_DEFAULTS[section_name]
    values = {attr: _pick(args, attr, section, key, getattr(defaults, attr), cast) for attr, key, cast in _TRAIN_FIELDS}
    if values["epochs"] < 0:
        raise InputError(f"epochs must be >= 0, got {values['epochs']}")
    if values["hidden_size"] < 1:
        raise InputError(f"hidden_size must be >= 1, got {values['hidden_size']}")
    if values["lr"] <= 0:
        raise InputError(f"lr must be > 0, got {values['lr']}")
    return TrainSettings(**values)


def resolve_log_level(args: argparse.Namespace, config: dict) -> str:
    level = getattr(args, "log_level", None) or config.get("log_level") or "WARNING"
    return str(level).upper()
