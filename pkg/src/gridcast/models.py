"""Model flavors, construction, training, and checkpoint round-trips.

The two flavors per family follow the published hyperparameter grid; flavor 0
is always the simpler instance. Override dicts exist so experiments can run
shrunken variants of the same architectures without new config plumbing.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass
from datetime import date
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigError
from .lstm_ed import LstmEdConfig, LstmEdModel
from .nbeats import NBeatsConfig, NBeatsModel
from .optim import TrainConfig, TrainingStats, fit
from .psf import PsfConfig, PsfEnsemble
from .scaling import Scaler
from .series import SplitDataset
from .tcn import TcnConfig, TcnModel
from .windows import prepare_training_data

LOOKBACK_GRID = (384, 672, 960)
FAMILIES = ("psf", "nbeats", "lstm", "tcn")

NBEATS_FLAVORS = {
    0: {"stacks": 20, "layer_width": 64},
    1: {"stacks": 30, "layer_width": 512},
}
LSTM_FLAVORS = {
    0: {"recurrent_layers": 1, "hidden_dim": 20, "learning_rate": 0.0008},
    1: {"recurrent_layers": 2, "hidden_dim": 64, "learning_rate": 0.001},
}
TCN_FLAVORS = {
    0: {"kernel_size": 3, "num_filters": 3, "dilation_base": 2},
    1: {"kernel_size": 5, "num_filters": 5, "dilation_base": 3},
}
PSF_FLAVORS = {0: "average", 1: "stacking"}


@dataclass
class UntrainedPsf:
    """Placeholder until fit; PSF has no parameters before seeing data."""

    cfg: PsfConfig
    stacking: bool

    family = "psf"
    uses_covariates = False


def _flavor_kwargs(table: dict, flavor: int, family: str) -> dict:
    if flavor not in table:
        raise ConfigError(f"unknown {family} flavor {flavor!r}; choose from {sorted(table)}")
    return dict(table[flavor])


def build_forecaster(
    family: str,
    flavor: int,
    lookback: int | None = 672,
    seed: int = 0,
    overrides: dict[str, Any] | None = None,
):
    """Instantiate an untrained forecaster for a (family, flavor, lookback) cell."""
    family = family.lower()
    extra = dict(overrides or {})
    if family == "psf":
        if flavor not in PSF_FLAVORS:
            raise ConfigError(f"unknown psf flavor {flavor!r}; choose from {sorted(PSF_FLAVORS)}")
        cfg = PsfConfig(seed=seed, **extra)
        return UntrainedPsf(cfg=cfg, stacking=PSF_FLAVORS[flavor] == "stacking")
    if lookback is None:
        raise ConfigError(f"family {family!r} requires a lookback")
    if family == "nbeats":
        kwargs = _flavor_kwargs(NBEATS_FLAVORS, flavor, family)
        kwargs.update(extra)
        return NBeatsModel(NBeatsConfig(lookback=lookback, **kwargs), seed=seed)
    if family == "lstm":
        kwargs = _flavor_kwargs(LSTM_FLAVORS, flavor, family)
        kwargs.update(extra)
        return LstmEdModel(LstmEdConfig(lookback=lookback, **kwargs), seed=seed)
    if family == "tcn":
        kwargs = _flavor_kwargs(TCN_FLAVORS, flavor, family)
        kwargs.update(extra)
        return TcnModel(TcnConfig(lookback=lookback, **kwargs), seed=seed)
    raise ConfigError(f"unknown model family {family!r}; choose from {FAMILIES}")


def default_train_config(model, seed: int = 0, **overrides) -> TrainConfig:
    """Training defaults, with the flavor's learning rate when it defines one."""
    kwargs: dict[str, Any] = {"seed": seed}
    lr = getattr(getattr(model, "cfg", None), "learning_rate", None)
    if lr is not None:
        kwargs["learning_rate"] = lr
    kwargs.update(overrides)
    return TrainConfig(**kwargs)


def train_forecaster(
    model,
    dataset: SplitDataset,
    cfg: TrainConfig | None = None,
    holidays: frozenset[date] = frozenset(),
):
    """Fit a forecaster on the dataset's train/validation periods.

    Returns (trained_model, TrainingStats). PSF placeholders are replaced by
    the fitted ensemble; neural models are trained in place.
    """
    if isinstance(model, UntrainedPsf):
        started = time.perf_counter()
        fitted = PsfEnsemble.fit(dataset.train, dataset.validation, model.cfg, model.stacking)
        stats = TrainingStats(epochs_run=0, wall_seconds=time.perf_counter() - started)
        stats.best_validation_loss = float("nan")
        return fitted, stats
    cfg = cfg or default_train_config(model)
    prepared = prepare_training_data(
        dataset.train,
        dataset.validation,
        lookback=model.cfg.lookback,
        with_covariates=model.uses_covariates,
        holidays=holidays,
        horizon=model.cfg.horizon,
    )
    model.data = prepared.data
    model.load_scaler = prepared.load_scaler
    model.cov_scaler = prepared.cov_scaler
    stats = fit(model, [prepared.train_starts], [prepared.val_starts], cfg)
    return model, stats


_NEURAL_CLASSES = {
    "nbeats": (NBeatsModel, NBeatsConfig),
    "lstm": (LstmEdModel, LstmEdConfig),
    "tcn": (TcnModel, TcnConfig),
}


def save_forecaster(model, path: str | Path, meta: dict | None = None) -> None:
    """Write a forecaster to a standalone JSON checkpoint."""
    path = Path(path)
    payload: dict[str, Any] = {"family": model.family, "meta": meta or {}}
    if model.family == "psf":
        if isinstance(model, UntrainedPsf):
            raise ConfigError("cannot checkpoint an unfitted PSF model")
        payload["psf"] = model.to_payload()
    else:
        payload["config"] = asdict(model.cfg)
        payload["params"] = [
            {"name": name, "shape": list(p.data.shape), "values": p.data.ravel().tolist()}
            for name, p in sorted(model.parameters().items())
        ]
        payload["scalers"] = {
            "load": model.load_scaler.to_dict() if model.load_scaler else None,
            "cov": model.cov_scaler.to_dict() if model.cov_scaler else None,
        }
    path.write_text(json.dumps(payload))


def load_forecaster(path: str | Path):
    """Rebuild a forecaster from `save_forecaster` output."""
    payload = json.loads(Path(path).read_text())
    family = payload["family"]
    if family == "psf":
        return PsfEnsemble.from_payload(payload["psf"])
    if family not in _NEURAL_CLASSES:
        raise ConfigError(f"checkpoint has unknown family {family!r}")
    model_cls, cfg_cls = _NEURAL_CLASSES[family]
    raw_cfg = dict(payload["config"])
    if "num_layers" in raw_cfg and raw_cfg["num_layers"] is not None:
        raw_cfg["num_layers"] = int(raw_cfg["num_layers"])
    model = model_cls(cfg_cls(**raw_cfg), seed=0)
    params = model.parameters()
    for entry in payload["params"]:
        name = entry["name"]
        if name not in params:
            raise ConfigError(f"checkpoint parameter {name!r} unknown to {family}")
        try:
            arr = np.asarray(entry["values"], dtype=np.float64).reshape(entry["shape"])
        except (TypeError, ValueError) as err:
            raise ConfigError(f"checkpoint parameter {name!r} is malformed: {err}") from err
        if arr.shape != params[name].data.shape:
            raise ConfigError(
                f"checkpoint parameter {name!r} has shape {arr.shape}, "
                f"model expects {params[name].data.shape}"
            )
        params[name].data = arr
    scalers = payload["scalers"]
    model.load_scaler = Scaler.from_dict(scalers["load"]) if scalers["load"] else None
    model.cov_scaler = Scaler.from_dict(scalers["cov"]) if scalers["cov"] else None
    return model
