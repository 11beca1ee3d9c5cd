"""Trivially cheap day-ahead forecasters used as reference points."""

from __future__ import annotations

import numpy as np

from .series import STEPS_PER_DAY, LoadSeries


class PersistenceForecaster:
    """Tomorrow looks like today: repeat the most recent full day."""

    family = "persistence"
    uses_covariates = False
    min_history_steps = STEPS_PER_DAY

    def predict_day(self, observed: LoadSeries, *_args) -> np.ndarray:
        return observed.values[-STEPS_PER_DAY:].copy()


class MeanDayForecaster:
    """Average daily profile over everything seen so far."""

    family = "mean_day"
    uses_covariates = False
    min_history_steps = STEPS_PER_DAY

    def predict_day(self, observed: LoadSeries, *_args) -> np.ndarray:
        n_days = observed.values.size // STEPS_PER_DAY
        days = observed.values[: n_days * STEPS_PER_DAY].reshape(n_days, STEPS_PER_DAY)
        return days.mean(axis=0)
