"""Ingestion, cleaning, splitting and synthesis of 15-minute load series."""

from __future__ import annotations

import calendar
import csv
import math
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from pathlib import Path

import numpy as np

from .errors import IngestError, SplitError, WrangleError

STEP = timedelta(minutes=15)
STEPS_PER_DAY = 96
STEP_MINUTES = 15


@dataclass
class RawSeries:
    """Parsed but not yet cleaned (timestamp, megawatt) rows.

    Entries are sorted ascending by timestamp; duplicate timestamps are
    permitted here and resolved by :func:`wrangle`.
    """

    entries: list[tuple[datetime, float]]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class LoadSeries:
    """A gap-free 15-minute load series: a start timestamp plus values."""

    start: datetime
    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", arr)
        if arr.ndim != 1:
            raise ValueError("values must be one-dimensional")
        if arr.size and not np.all(np.isfinite(arr)):
            raise ValueError("load series contains non-finite values")
        if self.start.minute % STEP_MINUTES or self.start.second or self.start.microsecond:
            raise ValueError(f"start {self.start} is not on the 15-minute grid")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def end(self) -> datetime:
        """Timestamp of the last sample."""
        return self.start + (len(self.values) - 1) * STEP

    def timestamp_at(self, i: int) -> datetime:
        return self.start + i * STEP

    def timestamps(self) -> list[datetime]:
        return [self.start + i * STEP for i in range(len(self.values))]

    def index_at(self, ts: datetime) -> int:
        """Index of ``ts`` on the grid; raises if off-grid or out of range."""
        delta = ts - self.start
        steps, rem = divmod(int(delta.total_seconds()), int(STEP.total_seconds()))
        if rem or not 0 <= steps < len(self.values):
            raise ValueError(f"{ts} is not a grid point of this series")
        return steps

    def segment(self, i0: int, i1: int) -> "LoadSeries":
        """Sub-series covering indices [i0, i1)."""
        if not 0 <= i0 < i1 <= len(self.values):
            raise ValueError(f"invalid segment bounds [{i0}, {i1})")
        return LoadSeries(self.timestamp_at(i0), self.values[i0:i1].copy())

    def as_raw(self) -> RawSeries:
        return RawSeries(list(zip(self.timestamps(), self.values.tolist())))

    def day_count(self) -> int:
        """Number of complete days, assuming the series starts at midnight."""
        return len(self.values) // STEPS_PER_DAY


def ingest_csv(path: str | Path) -> RawSeries:
    """Read a ``timestamp,load_mw`` CSV into a RawSeries.

    Rows are sorted by timestamp, ties keep file order. Timestamps must be
    ISO-8601 ``YYYY-MM-DDTHH:MM`` on the 15-minute grid; loads must be finite.
    """
    path = Path(path)
    if not path.exists():
        raise IngestError(f"no such file: {path}")
    entries: list[tuple[datetime, float]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        if [h.strip() for h in header] != ["timestamp", "load_mw"]:
            raise IngestError(f"{path}: expected header 'timestamp,load_mw', got {','.join(header)!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise IngestError(f"{path}, line {lineno}: expected 2 fields, got {len(row)}")
            try:
                ts = datetime.strptime(row[0].strip(), "%Y-%m-%dT%H:%M")
            except ValueError as exc:
                raise IngestError(f"{path}, line {lineno}: bad timestamp {row[0]!r} ({exc})") from None
            if ts.minute % STEP_MINUTES:
                raise IngestError(
                    f"{path}, line {lineno}: timestamp {row[0]} not on the 15-minute grid"
                )
            try:
                load = float(row[1])
            except ValueError:
                raise IngestError(f"{path}, line {lineno}: bad load value {row[1]!r}") from None
            if not math.isfinite(load):
                raise IngestError(f"{path}, line {lineno}: non-finite load {row[1]!r}")
            entries.append((ts, load))
    entries.sort(key=lambda e: e[0])  # stable: ties keep file order
    return RawSeries(entries)


def read_holidays(path: str | Path) -> frozenset[date]:
    """Read a holiday calendar: one ``YYYY-MM-DD`` per line, blanks and # comments ignored."""
    days = set()
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        try:
            days.add(date.fromisoformat(text))
        except ValueError:
            raise IngestError(f"{path}, line {lineno}: bad date {text!r}") from None
    return frozenset(days)


def wrangle(raw: RawSeries, max_gap_steps: int = 96) -> LoadSeries:
    """Collapse duplicate timestamps (keep first) and interpolate interior gaps.

    Gaps longer than ``max_gap_steps`` missing samples abort with the gap
    location; there is never extrapolation beyond the first or last sample.
    """
    if not raw.entries:
        raise WrangleError("cannot wrangle an empty series")
    entries = sorted(raw.entries, key=lambda e: e[0])
    deduped: list[tuple[datetime, float]] = []
    for ts, v in entries:
        if deduped and deduped[-1][0] == ts:
            continue  # keep-first duplicate rule (DST fall-back)
        deduped.append((ts, v))

    start = deduped[0][0]
    values: list[float] = [deduped[0][1]]
    prev_ts, prev_v = deduped[0]
    for ts, v in deduped[1:]:
        delta = ts - prev_ts
        steps, rem = divmod(int(delta.total_seconds()), int(STEP.total_seconds()))
        if rem:
            raise WrangleError(f"timestamp {ts} is not on the 15-minute grid anchored at {start}")
        missing = steps - 1
        if missing > max_gap_steps:
            raise WrangleError(
                f"gap of {missing} steps between {prev_ts} and {ts} exceeds the "
                f"maximum of {max_gap_steps}"
            )
        for j in range(1, missing + 1):
            values.append(prev_v + (v - prev_v) * j / (missing + 1))
        values.append(v)
        prev_ts, prev_v = ts, v
    return LoadSeries(start, np.array(values, dtype=np.float64))


@dataclass(frozen=True)
class SplitSpec:
    """Contiguous year-based train/validation/test split."""

    train_years: tuple[int, int]
    validation_year: int
    test_year: int

    def __post_init__(self):
        first, last = self.train_years
        if first > last:
            raise SplitError(f"train year range {first}-{last} is reversed")
        if self.validation_year != last + 1 or self.test_year != self.validation_year + 1:
            raise SplitError(
                "split years must be contiguous: train ... validation, test "
                f"(got {self.train_years}, {self.validation_year}, {self.test_year})"
            )


@dataclass(frozen=True)
class SplitDataset:
    train: LoadSeries
    validation: LoadSeries
    test: LoadSeries
    split_spec: SplitSpec


def split_by_years(series: LoadSeries, spec: SplitSpec) -> SplitDataset:
    """Cut train/validation/test segments at January 1st 00:00 boundaries."""

    def boundary(year: int) -> int:
        ts = datetime(year, 1, 1)
        try:
            return series.index_at(ts)
        except ValueError:
            raise SplitError(f"year {year} is not covered by the series") from None

    first_train = spec.train_years[0]
    i_train = boundary(first_train)
    i_val = boundary(spec.validation_year)
    i_test = boundary(spec.test_year)
    end_ts = datetime(spec.test_year + 1, 1, 1) - STEP
    try:
        i_end = series.index_at(end_ts) + 1
    except ValueError:
        raise SplitError(f"year {spec.test_year} is only partially covered") from None
    return SplitDataset(
        train=series.segment(i_train, i_val),
        validation=series.segment(i_val, i_test),
        test=series.segment(i_test, i_end),
        split_spec=spec,
    )


@dataclass(frozen=True)
class ShiftEvent:
    """Multiplicative level shift applied to all samples in [start, end]."""

    start: date
    end: date
    factor: float

    def __post_init__(self):
        if self.end < self.start:
            raise ValueError(f"shift window {self.start}..{self.end} is reversed")
        if self.factor <= 0:
            raise ValueError(f"shift factor must be positive, got {self.factor}")


@dataclass(frozen=True)
class SyntheticSpec:
    """Harmonic generator settings; amplitudes are fractions of the base level."""

    start_year: int = 2016
    years: int = 4
    base_mw: float = 5000.0
    daily_amp: float = 0.20
    weekly_amp: float = 0.05
    yearly_amp: float = 0.10
    noise_sigma: float = 0.02
    shifts: tuple[ShiftEvent, ...] = ()

    def __post_init__(self):
        if self.years < 1:
            raise ValueError(f"need at least one year, got {self.years}")
        for name in ("daily_amp", "weekly_amp", "yearly_amp", "noise_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


def harmonic_level(spec: SyntheticSpec, ts: datetime) -> float:
    """Deterministic (noise-free, shift-free) level at one timestamp."""
    base = spec.base_mw
    minute_of_day = ts.hour * 60 + ts.minute
    daily = -math.cos(2.0 * math.pi * minute_of_day / 1440.0)
    day_frac = (ts.weekday() + minute_of_day / 1440.0) / 7.0
    weekly = -math.cos(2.0 * math.pi * day_frac)
    year_len = 366.0 if calendar.isleap(ts.year) else 365.0
    doy_frac = (ts.timetuple().tm_yday - 1 + minute_of_day / 1440.0) / year_len
    yearly = math.cos(2.0 * math.pi * doy_frac)
    return base * (
        1.0 + spec.daily_amp * daily + spec.weekly_amp * weekly + spec.yearly_amp * yearly
    )


def generate_synthetic(spec: SyntheticSpec, seed: int) -> LoadSeries:
    """Base level + daily/weekly/yearly sinusoids + Gaussian noise + shifts.

    Deterministic for a given seed. Noise is drawn once per timestep in time
    order, so extending ``years`` leaves earlier samples unchanged.
    """
    start = datetime(spec.start_year, 1, 1)
    n_days = sum(
        366 if calendar.isleap(y) else 365
        for y in range(spec.start_year, spec.start_year + spec.years)
    )
    n = n_days * STEPS_PER_DAY
    values = np.empty(n, dtype=np.float64)
    ts = start
    for i in range(n):
        values[i] = harmonic_level(spec, ts)
        ts += STEP
    rng = np.random.default_rng(seed)
    if spec.noise_sigma > 0:
        values += rng.normal(0.0, spec.noise_sigma * spec.base_mw, size=n)
    for shift in spec.shifts:
        lo = (datetime.combine(shift.start, datetime.min.time()) - start) // STEP
        hi = (datetime.combine(shift.end, datetime.min.time()) - start) // STEP + STEPS_PER_DAY
        lo, hi = max(lo, 0), min(hi, n)
        if lo < hi:
            values[lo:hi] *= shift.factor
    return LoadSeries(start, values)


def concat(first: LoadSeries, second: LoadSeries) -> LoadSeries:
    """Join two series that are adjacent on the grid."""
    if first.end + STEP != second.start:
        raise ValueError(
            f"series are not adjacent: first ends {first.end}, second starts {second.start}"
        )
    return LoadSeries(first.start, np.concatenate([first.values, second.values]))
