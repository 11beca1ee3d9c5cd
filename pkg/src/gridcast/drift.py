"""Distribution-shift statistics and the rolling-error retrain monitor.

The monitor never touches models: it watches rolling backtest error against
a validation-era baseline and emits decisions (healthy / watch / retrain)
that an operator or scheduler can act on.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from datetime import date
from pathlib import Path

import numpy as np

from .backtest import BacktestReport, mape_detail
from .series import STEP, STEPS_PER_DAY, LoadSeries

HISTOGRAM_BINS = 50


@dataclass(frozen=True)
class DistributionStats:
    bin_edges: np.ndarray
    histograms: dict[int, np.ndarray]
    monthly_means: dict[int, np.ndarray]  # year -> 12 values, NaN for absent months
    daily_profiles: dict[int, np.ndarray]  # year -> 96 slot means

    @property
    def years(self) -> tuple[int, ...]:
        return tuple(sorted(self.histograms))


def distribution_stats(series: LoadSeries, years: list[int]) -> DistributionStats:
    """Histogram, monthly means, and average daily profile for each year."""
    if not years:
        raise ValueError("need at least one year")
    n = series.values.size
    stamps = np.datetime64(series.start) + np.arange(n) * np.timedelta64(int(STEP.total_seconds() // 60), "m")
    sample_years = stamps.astype("datetime64[Y]").astype(int) + 1970
    sample_months = stamps.astype("datetime64[M]").astype(int) % 12 + 1
    minute_of_day = (stamps - stamps.astype("datetime64[D]")).astype("timedelta64[m]").astype(int)
    slots = minute_of_day // 15

    wanted = np.isin(sample_years, years)
    if not wanted.any():
        raise ValueError(f"series has no samples in years {years}")
    lo = float(series.values[wanted].min())
    hi = float(series.values[wanted].max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, HISTOGRAM_BINS + 1)

    histograms, monthly, profiles = {}, {}, {}
    for year in years:
        mask = sample_years == year
        if not mask.any():
            raise ValueError(f"series has no samples in year {year}")
        vals = series.values[mask]
        histograms[year] = np.histogram(vals, bins=edges)[0]
        months = np.full(12, np.nan)
        for m in range(1, 13):
            m_mask = mask & (sample_months == m)
            if m_mask.any():
                months[m - 1] = series.values[m_mask].mean()
        monthly[year] = months
        profile = np.empty(STEPS_PER_DAY)
        year_slots = slots[mask]
        for s in range(STEPS_PER_DAY):
            profile[s] = vals[year_slots == s].mean()
        profiles[year] = profile
    return DistributionStats(
        bin_edges=edges, histograms=histograms, monthly_means=monthly, daily_profiles=profiles
    )


def write_stats_csv(stats: DistributionStats, out_dir: str | Path) -> list[Path]:
    """Three plot-ready CSVs: value histogram, monthly means, daily profiles."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    years = stats.years
    paths = []

    path = out_dir / "histogram.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_low", "bin_high"] + [str(y) for y in years])
        for i in range(HISTOGRAM_BINS):
            row = [f"{stats.bin_edges[i]:.6f}", f"{stats.bin_edges[i + 1]:.6f}"]
            row += [str(int(stats.histograms[y][i])) for y in years]
            writer.writerow(row)
    paths.append(path)

    path = out_dir / "monthly_means.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["month"] + [str(y) for y in years])
        for m in range(12):
            row = [str(m + 1)]
            row += ["" if np.isnan(stats.monthly_means[y][m]) else f"{stats.monthly_means[y][m]:.6f}" for y in years]
            writer.writerow(row)
    paths.append(path)

    path = out_dir / "daily_profiles.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["slot"] + [str(y) for y in years])
        for s in range(STEPS_PER_DAY):
            writer.writerow([str(s)] + [f"{stats.daily_profiles[y][s]:.6f}" for y in years])
    paths.append(path)
    return paths


def rolling_mape(report: BacktestReport, window_days: int) -> list[tuple[date, float]]:
    """Trailing per-point MAPE over each full window of the report's days."""
    if window_days < 1:
        raise ValueError(f"window_days must be >= 1, got {window_days}")
    if window_days > report.n_days:
        raise ValueError(f"window of {window_days} days exceeds {report.n_days} test days")
    out = []
    for end in range(window_days - 1, report.n_days):
        sl = slice(end - window_days + 1, end + 1)
        value = mape_detail(report.actuals[sl].ravel(), report.forecasts[sl].ravel())[0]
        out.append((report.dates[end], value))
    return out


@dataclass(frozen=True)
class DriftState:
    baseline_mape: float
    rolling_window_days: int = 30
    threshold_ratio: float = 1.5
    persistence_days: int = 7
    consecutive_breaches: int = 0
    triggered: bool = False

    def __post_init__(self):
        if self.baseline_mape < 0:
            raise ValueError("baseline_mape must be non-negative")
        if self.threshold_ratio <= 1:
            raise ValueError(f"threshold_ratio must exceed 1, got {self.threshold_ratio}")
        if self.rolling_window_days < 1 or self.persistence_days < 1:
            raise ValueError("window and persistence must be at least one day")


@dataclass(frozen=True)
class DriftEvent:
    date: date
    rolling_mape: float
    baseline_mape: float
    decision: str


def evaluate_drift(
    state: DriftState, rolling: list[tuple[date, float]]
) -> tuple[DriftState, list[DriftEvent]]:
    """Fold rolling errors through the breach/persistence rule.

    A day breaches when rolling MAPE exceeds baseline x threshold_ratio;
    `persistence_days` consecutive breaches latch the retrain trigger.
    Decisions: healthy (no breach), watch (breaching, not yet latched),
    retrain (latched — sticky until a retrain resets the state).
    """
    events = []
    threshold = state.baseline_mape * state.threshold_ratio
    for day, value in rolling:
        if value > threshold:
            consecutive = min(state.consecutive_breaches + 1, state.persistence_days)
        else:
            consecutive = 0
        triggered = state.triggered or consecutive >= state.persistence_days
        if triggered:
            decision = "retrain"
        elif value > threshold:
            decision = "watch"
        else:
            decision = "healthy"
        state = replace(state, consecutive_breaches=consecutive, triggered=triggered)
        events.append(DriftEvent(date=day, rolling_mape=value, baseline_mape=state.baseline_mape, decision=decision))
    return state, events


def write_event_log(path: str | Path, events: list[DriftEvent]) -> None:
    with open(path, "a") as fh:
        for ev in events:
            fh.write(
                json.dumps(
                    {
                        "date": ev.date.isoformat(),
                        "rolling_mape": ev.rolling_mape,
                        "baseline_mape": ev.baseline_mape,
                        "decision": ev.decision,
                    }
                )
                + "\n"
            )


def read_event_log(path: str | Path) -> list[dict]:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows
