"""Day-ahead training windows: lookback slices paired with next-day targets.

Windows are gathered lazily from one standardized base series, so only the
per-day start indices are shuffled and batched during training.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date

import numpy as np

from .covariates import build_matrix
from .scaling import Scaler
from .series import STEPS_PER_DAY, LoadSeries, concat


@dataclass
class DayAheadData:
    """Standardized base arrays plus gather logic for (window, target) pairs."""

    values: np.ndarray  # (N,) standardized loads
    covs: np.ndarray | None  # (N, 10) standardized covariates, if used
    lookback: int
    horizon: int = STEPS_PER_DAY

    def gather(self, starts: np.ndarray) -> tuple[np.ndarray, ...]:
        """Arrays for target days beginning at the given indices.

        Returns (x_load, y) or (x_load, x_cov, y, f_cov) with shapes
        (B, lookback), (B, lookback, 10), (B, horizon), (B, horizon, 10).
        """
        starts = np.asarray(starts, dtype=np.int64)
        back = starts[:, None] + np.arange(-self.lookback, 0)
        ahead = starts[:, None] + np.arange(self.horizon)
        x_load = self.values[back]
        y = self.values[ahead]
        if self.covs is None:
            return x_load, y
        return x_load, self.covs[back], y, self.covs[ahead]


@dataclass
class PreparedTraining:
    data: DayAheadData
    train_starts: np.ndarray
    val_starts: np.ndarray
    load_scaler: Scaler
    cov_scaler: Scaler | None


def prepare_training_data(
    train: LoadSeries,
    validation: LoadSeries,
    lookback: int,
    with_covariates: bool,
    holidays: frozenset[date] = frozenset(),
    horizon: int = STEPS_PER_DAY,
) -> PreparedTraining:
    """Build the shared base arrays and per-day start indices.

    Scalers are fit on the training segment only. Validation targets may
    look back across the train/validation boundary, matching how the model
    is used after deployment.
    """
    if train.start.hour or train.start.minute:
        raise ValueError("training series must start at midnight for day alignment")
    full = concat(train, validation)
    load_scaler = Scaler.fit(train.values)
    values = load_scaler.transform(full.values)
    covs = None
    cov_scaler = None
    if with_covariates:
        raw = build_matrix(full, holidays)
        cov_scaler = Scaler.fit(raw[: len(train)])
        covs = cov_scaler.transform(raw)
    n_train = len(train)
    first_day = -(-lookback // STEPS_PER_DAY)  # first target day with a full lookback
    day_starts = np.arange(first_day * STEPS_PER_DAY, len(full) - horizon + 1, STEPS_PER_DAY)
    train_starts = day_starts[day_starts + horizon <= n_train]
    val_starts = day_starts[day_starts >= n_train]
    data = DayAheadData(values=values, covs=covs, lookback=lookback, horizon=horizon)
    return PreparedTraining(
        data=data,
        train_starts=train_starts,
        val_starts=val_starts,
        load_scaler=load_scaler,
        cov_scaler=cov_scaler,
    )
