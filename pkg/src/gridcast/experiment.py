"""Experiment grid: build, train, and backtest every (family, flavor, lookback) cell.

The default grid is 2 PSF ensembles + 3 neural families x 2 flavors x
3 lookbacks = 20 runs, numbered in that order. Cell failures are recorded
and skipped so one divergent run cannot void a batch. Registry rows are
written in grid order regardless of completion order, which keeps output
files byte-stable for a fixed seed.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from datetime import date
from pathlib import Path

from .backtest import append_registry, backtest_day_ahead, registry_row
from .configfile import ModelSelection, RunConfig
from .errors import ConfigError
from .lstm_ed import LstmEdConfig
from .models import build_forecaster, train_forecaster
from .nbeats import NBeatsConfig
from .psf import PsfConfig
from .series import SplitDataset, concat, generate_synthetic, ingest_csv, read_holidays, split_by_years, wrangle
from .tcn import TcnConfig

_NEURAL_ORDER = ("nbeats", "lstm", "tcn")

_CONFIG_FIELDS = {
    "psf": {f.name for f in fields(PsfConfig)} - {"seed"},
    "nbeats": {f.name for f in fields(NBeatsConfig)} - {"lookback"},
    "lstm": {f.name for f in fields(LstmEdConfig)} - {"lookback"},
    "tcn": {f.name for f in fields(TcnConfig)} - {"lookback"},
}


@dataclass(frozen=True)
class GridCell:
    model_id: int
    family: str
    flavor: int
    lookback: int | None


@dataclass(frozen=True)
class ExperimentSpec:
    config: RunConfig
    out_dir: Path
    seed: int
    jobs: int = 1

    def __post_init__(self):
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")


def resolve_dataset(cfg: RunConfig, seed: int) -> tuple[SplitDataset, frozenset[date]]:
    """Materialize the split dataset the config describes (CSV or synthetic)."""
    holidays = read_holidays(cfg.data.holidays) if cfg.data.holidays else frozenset()
    if cfg.data.csv:
        series = wrangle(ingest_csv(cfg.data.csv))
    elif cfg.synthetic is not None:
        series = generate_synthetic(cfg.synthetic, seed)
    else:
        raise ConfigError("config needs either [data] csv or a [synthetic] section")
    if cfg.split is None:
        raise ConfigError("config needs a [split] section")
    return split_by_years(series, cfg.split), holidays


def grid_cells(selection: ModelSelection) -> list[GridCell]:
    """Enumerate cells: PSF ensembles first, then each neural family flavor-major."""
    cells = []
    next_id = 0
    if "psf" in selection.families:
        for flavor in selection.flavors:
            cells.append(GridCell(next_id, "psf", flavor, None))
            next_id += 1
    for family in _NEURAL_ORDER:
        if family not in selection.families:
            continue
        for flavor in selection.flavors:
            for lookback in selection.lookbacks:
                cells.append(GridCell(next_id, family, flavor, lookback))
                next_id += 1
    if not cells:
        raise ConfigError("model selection produced an empty grid")
    return cells


def _family_overrides(family: str, overrides: dict) -> dict:
    return {k: v for k, v in overrides.items() if k in _CONFIG_FIELDS[family]}


def run_cell(cell: GridCell, dataset: SplitDataset, holidays: frozenset[date], cfg: RunConfig, seed: int) -> dict:
    """Train and backtest one grid cell, returning its registry row."""
    model = build_forecaster(
        cell.family,
        cell.flavor,
        cell.lookback,
        seed=seed + cell.model_id,
        overrides=_family_overrides(cell.family, cfg.models.overrides),
    )
    train_cfg = replace(cfg.training, seed=seed + cell.model_id)
    if not cfg.explicit_lr:
        flavor_lr = getattr(getattr(model, "cfg", None), "learning_rate", None)
        if flavor_lr is not None:
            train_cfg = replace(train_cfg, learning_rate=flavor_lr)
    trained, stats = train_forecaster(model, dataset, train_cfg, holidays)
    history = concat(dataset.train, dataset.validation)
    report = backtest_day_ahead(
        trained, history, dataset.test, holidays, model_id=cell.model_id, training_stats=stats
    )
    return registry_row(report, cell.family, cell.flavor, cell.lookback, stats, timing=cfg.timing)


def run_experiment_grid(spec: ExperimentSpec) -> tuple[list[dict], list[dict]]:
    """Run every cell; return (registry rows, failure records) in grid order.

    Also appends rows to `<out_dir>/registry.jsonl` and failures to
    `<out_dir>/failures.jsonl`.
    """
    dataset, holidays = resolve_dataset(spec.config, spec.seed)
    cells = grid_cells(spec.config.models)
    spec.out_dir.mkdir(parents=True, exist_ok=True)

    def attempt(cell: GridCell):
        try:
            return cell, run_cell(cell, dataset, holidays, spec.config, spec.seed), None
        except Exception as exc:  # noqa: BLE001 - cell isolation is the point
            failure = {
                "model_id": cell.model_id,
                "family": cell.family,
                "flavor": cell.flavor,
                "lookback": cell.lookback,
                "error": f"{type(exc).__name__}: {exc}",
            }
            return cell, None, failure

    if spec.jobs == 1:
        outcomes = [attempt(cell) for cell in cells]
    else:
        with ThreadPoolExecutor(max_workers=spec.jobs) as pool:
            outcomes = list(pool.map(attempt, cells))

    rows, failures = [], []
    registry_path = spec.out_dir / "registry.jsonl"
    failures_path = spec.out_dir / "failures.jsonl"
    for _cell, row, failure in sorted(outcomes, key=lambda o: o[0].model_id):
        if row is not None:
            rows.append(row)
            append_registry(registry_path, row)
        else:
            failures.append(failure)
            append_registry(failures_path, failure)
    return rows, failures
