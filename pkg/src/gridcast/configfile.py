"""INI-style run configuration.

Flat key=value sections so configs stay diff-friendly:

    [data]       csv, holidays
    [synthetic]  start_year, years, base_mw, amplitudes, noise, shifts
    [split]      train, validation, test (calendar years)
    [model]      families/flavors/lookbacks grid, plus architecture overrides
    [training]   optimizer/early-stopping settings, timing
    [monitor]    drift thresholds

Any key in [model] that is not a grid key is treated as a config override
for the chosen architectures (e.g. `layer_width = 16` to shrink N-BEATS).
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .optim import TrainConfig
from .series import ShiftEvent, SplitSpec, SyntheticSpec

_GRID_KEYS = {"families", "flavors", "lookbacks", "family", "flavor", "lookback"}
_DEFAULT_FAMILIES = ("psf", "nbeats", "lstm", "tcn")
_DEFAULT_LOOKBACKS = (384, 672, 960)


@dataclass(frozen=True)
class DataConfig:
    csv: str | None = None
    holidays: str | None = None


@dataclass(frozen=True)
class ModelSelection:
    families: tuple[str, ...] = _DEFAULT_FAMILIES
    flavors: tuple[int, ...] = (0, 1)
    lookbacks: tuple[int, ...] = _DEFAULT_LOOKBACKS
    overrides: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class MonitorConfig:
    window_days: int = 30
    threshold_ratio: float = 1.5
    persistence_days: int = 7
    baseline_mape: float | None = None


@dataclass(frozen=True)
class RunConfig:
    data: DataConfig = DataConfig()
    synthetic: SyntheticSpec | None = None
    split: SplitSpec | None = None
    models: ModelSelection = ModelSelection()
    training: TrainConfig = TrainConfig()
    explicit_lr: bool = False  # whether [training] pinned the learning rate
    timing: str = "wall"
    monitor: MonitorConfig = MonitorConfig()


def _int(section, key, default):
    raw = section.get(key)
    return default if raw is None else int(raw)


def _float(section, key, default):
    raw = section.get(key)
    return default if raw is None else float(raw)


def _year_range(raw: str) -> tuple[int, int]:
    if "-" in raw:
        lo, hi = raw.split("-", 1)
        return int(lo), int(hi)
    return int(raw), int(raw)


def _parse_shifts(raw: str) -> tuple[ShiftEvent, ...]:
    """`2020-03-17:2020-05-03:0.8, ...` -> ShiftEvents."""
    events = []
    for chunk in raw.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(":")
        if len(parts) != 3:
            raise ConfigError(f"shift {chunk!r} is not start:end:factor")
        events.append(
            ShiftEvent(date.fromisoformat(parts[0]), date.fromisoformat(parts[1]), float(parts[2]))
        )
    return tuple(events)


def _coerce_override(raw: str) -> Any:
    """Best-effort typing for free-form [model] override values."""
    raw = raw.strip()
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", "auto"):
        return None
    if "-" in raw[1:] and all(p.strip().lstrip("-").isdigit() for p in raw.split("-", 1)):
        lo, hi = raw.split("-", 1)
        return (int(lo), int(hi))
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        return raw


def parse_config(path: str | Path) -> RunConfig:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file {path} not found or unreadable")
    known = {"data", "synthetic", "split", "model", "training", "monitor"}
    unknown = set(parser.sections()) - known
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    data = DataConfig()
    if parser.has_section("data"):
        sec = parser["data"]
        data = DataConfig(csv=sec.get("csv"), holidays=sec.get("holidays"))

    synthetic = None
    if parser.has_section("synthetic"):
        sec = parser["synthetic"]
        synthetic = SyntheticSpec(
            start_year=_int(sec, "start_year", 2016),
            years=_int(sec, "years", 4),
            base_mw=_float(sec, "base_mw", 5000.0),
            daily_amp=_float(sec, "daily_amp", 0.20),
            weekly_amp=_float(sec, "weekly_amp", 0.05),
            yearly_amp=_float(sec, "yearly_amp", 0.10),
            noise_sigma=_float(sec, "noise_sigma", 0.02),
            shifts=_parse_shifts(sec.get("shifts", "")),
        )

    split = None
    if parser.has_section("split"):
        sec = parser["split"]
        for key in ("train", "validation", "test"):
            if key not in sec:
                raise ConfigError(f"[split] section is missing {key!r}")
        val_lo, val_hi = _year_range(sec["validation"])
        test_lo, test_hi = _year_range(sec["test"])
        if val_lo != val_hi or test_lo != test_hi:
            raise ConfigError("validation and test must each be a single year")
        split = SplitSpec(
            train_years=_year_range(sec["train"]),
            validation_year=val_lo,
            test_year=test_lo,
        )

    models = ModelSelection()
    if parser.has_section("model"):
        sec = parser["model"]
        families = tuple(
            f.strip().lower() for f in sec.get("families", sec.get("family", ",".join(_DEFAULT_FAMILIES))).split(",") if f.strip()
        )
        flavors = tuple(
            int(f) for f in sec.get("flavors", sec.get("flavor", "0,1")).split(",") if f.strip()
        )
        lookbacks = tuple(
            int(l) for l in sec.get("lookbacks", sec.get("lookback", "384,672,960")).split(",") if l.strip()
        )
        overrides = {
            key: _coerce_override(value) for key, value in sec.items() if key not in _GRID_KEYS
        }
        models = ModelSelection(families=families, flavors=flavors, lookbacks=lookbacks, overrides=overrides)

    training = TrainConfig()
    explicit_lr = False
    timing = "wall"
    if parser.has_section("training"):
        sec = parser["training"]
        explicit_lr = "learning_rate" in sec
        timing = sec.get("timing", "wall").lower()
        if timing not in ("wall", "off"):
            raise ConfigError(f"timing must be 'wall' or 'off', got {timing!r}")
        training = TrainConfig(
            learning_rate=_float(sec, "learning_rate", 1e-3),
            batch_size=_int(sec, "batch_size", 256),
            max_epochs=_int(sec, "max_epochs", 300),
            patience=_int(sec, "patience", 10),
            min_delta=_float(sec, "min_delta", 1e-4),
            seed=_int(sec, "seed", 0),
        )

    monitor = MonitorConfig()
    if parser.has_section("monitor"):
        sec = parser["monitor"]
        monitor = MonitorConfig(
            window_days=_int(sec, "window_days", 30),
            threshold_ratio=_float(sec, "threshold_ratio", 1.5),
            persistence_days=_int(sec, "persistence_days", 7),
            baseline_mape=_float(sec, "baseline_mape", None) if "baseline_mape" in sec else None,
        )

    return RunConfig(
        data=data,
        synthetic=synthetic,
        split=split,
        models=models,
        training=training,
        explicit_lr=explicit_lr,
        timing=timing,
        monitor=monitor,
    )
