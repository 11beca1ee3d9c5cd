"""Day-ahead backtesting: rolling history updates, MAPE, seasonal breakdown."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import date, datetime
from pathlib import Path

import numpy as np

from .covariates import build_matrix
from .errors import ShapeError
from .optim import TrainingStats
from .series import STEPS_PER_DAY, LoadSeries, concat

SEASONS = ("winter", "spring", "summer", "autumn")

_SEASON_BY_MONTH = {
    12: "winter", 1: "winter", 2: "winter",
    3: "spring", 4: "spring", 5: "spring",
    6: "summer", 7: "summer", 8: "summer",
    9: "autumn", 10: "autumn", 11: "autumn",
}


def season_of(d: date) -> str:
    return _SEASON_BY_MONTH[d.month]


def mape_detail(actual: np.ndarray, forecast: np.ndarray) -> tuple[float, int]:
    """Mean absolute percentage error and the count of excluded zero-actual points."""
    actual = np.asarray(actual, dtype=np.float64)
    forecast = np.asarray(forecast, dtype=np.float64)
    if actual.shape != forecast.shape or actual.size < 1:
        raise ValueError(f"incompatible shapes {actual.shape} vs {forecast.shape}")
    keep = actual != 0.0
    excluded = int(actual.size - keep.sum())
    if not keep.any():
        raise ValueError("every actual is zero; MAPE is undefined")
    errors = np.abs(actual[keep] - forecast[keep]) / np.abs(actual[keep])
    return float(errors.mean() * 100.0), excluded


def mape(actual: np.ndarray, forecast: np.ndarray) -> float:
    return mape_detail(actual, forecast)[0]


@dataclass
class BacktestReport:
    model_id: str | int | None
    dates: tuple[date, ...]
    forecasts: np.ndarray  # (days, 96) megawatts
    actuals: np.ndarray  # (days, 96) megawatts
    overall_mape: float
    per_season_mape: dict[str, float | None]
    excluded_points: int
    training_stats: TrainingStats | None = field(default=None, repr=False)

    @property
    def n_days(self) -> int:
        return len(self.dates)


def backtest_day_ahead(
    model,
    history: LoadSeries,
    test: LoadSeries,
    holidays: frozenset[date] = frozenset(),
    model_id: str | int | None = None,
    training_stats: TrainingStats | None = None,
) -> BacktestReport:
    """Forecast each test day, then append that day's actuals to the history.

    The model is never retrained inside the loop; only its observable
    history grows, one real day at a time.
    """
    if history.values.size < model.min_history_steps:
        raise ValueError(
            f"history has {history.values.size} steps; model needs {model.min_history_steps}"
        )
    if test.start.hour or test.start.minute or test.values.size % STEPS_PER_DAY:
        raise ValueError("test period must cover whole days starting at midnight")
    combined = concat(history, test)
    boundary = history.values.size
    n_days = test.values.size // STEPS_PER_DAY
    covs = build_matrix(combined, holidays) if model.uses_covariates else None

    forecasts = np.empty((n_days, STEPS_PER_DAY))
    actuals = np.empty((n_days, STEPS_PER_DAY))
    dates = []
    for d in range(n_days):
        t0 = boundary + d * STEPS_PER_DAY
        observed = combined.segment(0, t0)
        if covs is None:
            pred = model.predict_day(observed)
        else:
            lookback = model.cfg.lookback
            pred = model.predict_day(
                observed, covs[t0 - lookback : t0], covs[t0 : t0 + STEPS_PER_DAY]
            )
        pred = np.asarray(pred, dtype=np.float64)
        if pred.shape != (STEPS_PER_DAY,):
            raise ShapeError(f"model emitted shape {pred.shape}, expected ({STEPS_PER_DAY},)")
        forecasts[d] = pred
        actuals[d] = test.values[d * STEPS_PER_DAY : (d + 1) * STEPS_PER_DAY]
        dates.append(test.timestamp_at(d * STEPS_PER_DAY).date())

    overall, excluded = mape_detail(actuals.ravel(), forecasts.ravel())
    report = BacktestReport(
        model_id=model_id,
        dates=tuple(dates),
        forecasts=forecasts,
        actuals=actuals,
        overall_mape=overall,
        per_season_mape={},
        excluded_points=excluded,
        training_stats=training_stats,
    )
    report.per_season_mape = seasonal_breakdown(report)
    return report


def seasonal_breakdown(report: BacktestReport) -> dict[str, float | None]:
    """Per-season MAPE; seasons without evaluable points map to None."""
    out: dict[str, float | None] = {}
    season_labels = np.array([season_of(d) for d in report.dates])
    for season in SEASONS:
        mask = season_labels == season
        if not mask.any():
            out[season] = None
            continue
        actual = report.actuals[mask].ravel()
        forecast = report.forecasts[mask].ravel()
        if not (actual != 0.0).any():
            out[season] = None
            continue
        out[season] = mape_detail(actual, forecast)[0]
    return out


def registry_row(
    report: BacktestReport,
    family: str,
    flavor: int,
    lookback: int | None,
    stats: TrainingStats | None = None,
    timing: str = "wall",
) -> dict:
    """One run-registry record; `timing="off"` zeroes wall time for reproducible files."""
    stats = stats if stats is not None else report.training_stats
    return {
        "model_id": report.model_id,
        "family": family,
        "flavor": flavor,
        "lookback": lookback,
        "overall_mape": report.overall_mape,
        "seasonal": {season: report.per_season_mape.get(season) for season in SEASONS},
        "epochs": stats.epochs_run if stats else 0,
        "train_wall_seconds": (stats.wall_seconds if stats and timing == "wall" else 0.0),
        "excluded_points": report.excluded_points,
    }


def append_registry(path: str | Path, row: dict) -> None:
    with open(path, "a") as fh:
        fh.write(json.dumps(row) + "\n")


def read_registry(path: str | Path) -> list[dict]:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def save_report(report: BacktestReport, path: str | Path) -> None:
    """Full report JSON, enough to re-derive any metric offline."""
    payload = {
        "model_id": report.model_id,
        "dates": [d.isoformat() for d in report.dates],
        "forecasts": report.forecasts.tolist(),
        "actuals": report.actuals.tolist(),
        "overall_mape": report.overall_mape,
        "seasonal": report.per_season_mape,
        "excluded_points": report.excluded_points,
    }
    Path(path).write_text(json.dumps(payload))


def load_report(path: str | Path) -> BacktestReport:
    payload = json.loads(Path(path).read_text())
    return BacktestReport(
        model_id=payload["model_id"],
        dates=tuple(datetime.strptime(d, "%Y-%m-%d").date() for d in payload["dates"]),
        forecasts=np.asarray(payload["forecasts"], dtype=np.float64),
        actuals=np.asarray(payload["actuals"], dtype=np.float64),
        overall_mape=float(payload["overall_mape"]),
        per_season_mape=dict(payload["seasonal"]),
        excluded_points=int(payload["excluded_points"]),
    )
