"""Calendar covariates: each timestamp becomes a 10-component feature row.

Columns: year (integer), month sin/cos, day-of-year sin/cos, day-of-week
sin/cos, week-of-year sin/cos, holiday flag. Angles start at zero for
January / day 1 / Monday / week 1.
"""

from __future__ import annotations

import calendar
import math
from dataclasses import dataclass
from datetime import date, datetime
from typing import Iterable

import numpy as np

from .series import LoadSeries

COVARIATE_COLUMNS = (
    "year",
    "month_sin",
    "month_cos",
    "doy_sin",
    "doy_cos",
    "dow_sin",
    "dow_cos",
    "woy_sin",
    "woy_cos",
    "holiday",
)
COVARIATE_DIM = len(COVARIATE_COLUMNS)


@dataclass(frozen=True)
class CovariateVector:
    year: int
    month_sin: float
    month_cos: float
    doy_sin: float
    doy_cos: float
    dow_sin: float
    dow_cos: float
    woy_sin: float
    woy_cos: float
    holiday: int

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, c) for c in COVARIATE_COLUMNS], dtype=np.float64)


def encode_timestamp(ts: datetime, holidays: frozenset[date] | set[date] = frozenset()) -> CovariateVector:
    """Encode one grid timestamp into the covariate vector."""
    doy = ts.timetuple().tm_yday
    year_days = 366 if calendar.isleap(ts.year) else 365
    week = (doy - 1) // 7 + 1  # simple day-count week, 1..53

    month_angle = 2.0 * math.pi * (ts.month - 1) / 12.0
    doy_angle = 2.0 * math.pi * (doy - 1) / year_days
    dow_angle = 2.0 * math.pi * ts.weekday() / 7.0  # Monday = 0
    woy_angle = 2.0 * math.pi * (week - 1) / 53.0

    return CovariateVector(
        year=ts.year,
        month_sin=math.sin(month_angle),
        month_cos=math.cos(month_angle),
        doy_sin=math.sin(doy_angle),
        doy_cos=math.cos(doy_angle),
        dow_sin=math.sin(dow_angle),
        dow_cos=math.cos(dow_angle),
        woy_sin=math.sin(woy_angle),
        woy_cos=math.cos(woy_angle),
        holiday=1 if ts.date() in holidays else 0,
    )


def encode_timestamps(timestamps: Iterable[datetime], holidays: frozenset[date] = frozenset()) -> np.ndarray:
    """Rows of :func:`encode_timestamp` stacked into an (N, 10) matrix."""
    rows = [encode_timestamp(ts, holidays).as_array() for ts in timestamps]
    if not rows:
        return np.empty((0, COVARIATE_DIM), dtype=np.float64)
    return np.stack(rows)


def build_matrix(series: LoadSeries, holidays: frozenset[date] = frozenset()) -> np.ndarray:
    """Covariate matrix aligned one-to-one with the series' timestamps."""
    return encode_timestamps(series.timestamps(), holidays)
