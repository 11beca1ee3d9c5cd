"""Distribution statistics, rolling error, and the retrain monitor."""

import datetime as dt

import numpy as np
import pytest

from gridcast.backtest import BacktestReport, mape_detail
from gridcast.drift import (
    HISTOGRAM_BINS,
    DriftEvent,
    DriftState,
    distribution_stats,
    evaluate_drift,
    read_event_log,
    rolling_mape,
    write_event_log,
    write_stats_csv,
)
from gridcast.series import LoadSeries


def two_year_series(seed=0):
    rng = np.random.default_rng(seed)
    values = 80.0 + rng.uniform(0, 40, size=730 * 96)
    return LoadSeries(dt.datetime(2021, 1, 1), values)


def april_bump_series(delta=30.0):
    """Constant 100 MW for 2021-2022 except April 2022 at 100 + delta."""
    values = np.full(730 * 96, 100.0)
    for d in range(730):
        day = dt.date(2021, 1, 1) + dt.timedelta(days=d)
        if day.year == 2022 and day.month == 4:
            values[d * 96 : (d + 1) * 96] = 100.0 + delta
    return LoadSeries(dt.datetime(2021, 1, 1), values)


class TestDistributionStats:
    def test_histogram_conserves_sample_counts(self):
        stats = distribution_stats(two_year_series(), [2021, 2022])
        assert stats.bin_edges.shape == (HISTOGRAM_BINS + 1,)
        for year in (2021, 2022):
            assert stats.histograms[year].shape == (HISTOGRAM_BINS,)
            assert stats.histograms[year].sum() == 365 * 96

    def test_years_property_sorted(self):
        stats = distribution_stats(two_year_series(), [2022, 2021])
        assert stats.years == (2021, 2022)

    def test_monthly_means_shift_linearly(self):
        base = two_year_series(seed=3)
        shifted = LoadSeries(base.start, base.values + 5.0)
        a = distribution_stats(base, [2021, 2022])
        b = distribution_stats(shifted, [2021, 2022])
        for year in (2021, 2022):
            assert np.allclose(
                b.monthly_means[year], a.monthly_means[year] + 5.0, rtol=1e-12
            )

    def test_single_month_shift_is_visible_and_localized(self):
        stats = distribution_stats(april_bump_series(delta=30.0), [2021, 2022])
        assert stats.monthly_means[2022][3] == 130.0
        assert stats.monthly_means[2021][3] == 100.0
        for m in range(12):
            if m != 3:
                assert stats.monthly_means[2021][m] == 100.0
                assert stats.monthly_means[2022][m] == 100.0

    def test_daily_profile_of_constant_year(self):
        stats = distribution_stats(april_bump_series(delta=30.0), [2021])
        assert np.array_equal(stats.daily_profiles[2021], np.full(96, 100.0))

    def test_constant_series_degenerate_edges(self):
        series = LoadSeries(dt.datetime(2021, 1, 1), np.full(365 * 96, 100.0))
        stats = distribution_stats(series, [2021])
        assert stats.bin_edges[0] == 99.5
        assert stats.bin_edges[-1] == 100.5
        assert stats.histograms[2021].sum() == 365 * 96

    def test_missing_year_rejected(self):
        with pytest.raises(ValueError):
            distribution_stats(two_year_series(), [2021, 2023])
        with pytest.raises(ValueError):
            distribution_stats(two_year_series(), [1999])
        with pytest.raises(ValueError):
            distribution_stats(two_year_series(), [])


class TestStatsCsv:
    def test_three_files_with_headers(self, tmp_path):
        stats = distribution_stats(two_year_series(), [2021, 2022])
        paths = write_stats_csv(stats, tmp_path / "out")
        names = [p.name for p in paths]
        assert names == ["histogram.csv", "monthly_means.csv", "daily_profiles.csv"]
        lines = {p.name: p.read_text().splitlines() for p in paths}
        assert lines["histogram.csv"][0] == "bin_low,bin_high,2021,2022"
        assert len(lines["histogram.csv"]) == HISTOGRAM_BINS + 1
        assert lines["monthly_means.csv"][0] == "month,2021,2022"
        assert len(lines["monthly_means.csv"]) == 13
        assert lines["daily_profiles.csv"][0] == "slot,2021,2022"
        assert len(lines["daily_profiles.csv"]) == 97


def error_report(day_errors, start=dt.date(2022, 1, 1)):
    """Report where every point on day d is off by exactly day_errors[d] percent."""
    n = len(day_errors)
    dates = tuple(start + dt.timedelta(days=i) for i in range(n))
    actuals = np.full((n, 96), 100.0)
    forecasts = 100.0 + np.asarray(day_errors, dtype=np.float64)[:, None] * np.ones(96)
    overall, excluded = mape_detail(actuals.ravel(), forecasts.ravel())
    return BacktestReport(
        model_id="monitor-stub",
        dates=dates,
        forecasts=forecasts,
        actuals=actuals,
        overall_mape=overall,
        per_season_mape={},
        excluded_points=excluded,
    )


class TestRollingMape:
    def test_trailing_window_means(self):
        errors = [1.0, 2.0, 4.0, 8.0, 2.0]
        report = error_report(errors)
        rolled = rolling_mape(report, window_days=2)
        assert [d for d, _ in rolled] == list(report.dates[1:])
        for j, (_, value) in enumerate(rolled):
            assert value == pytest.approx((errors[j] + errors[j + 1]) / 2, rel=1e-12)

    def test_window_of_one_recovers_daily_errors(self):
        errors = [3.0, 0.0, 7.5]
        rolled = rolling_mape(error_report(errors), window_days=1)
        assert [v for _, v in rolled] == pytest.approx(errors, rel=1e-12)

    def test_full_window_equals_overall(self):
        report = error_report([1.0, 5.0, 2.0, 2.5])
        rolled = rolling_mape(report, window_days=4)
        assert len(rolled) == 1
        assert rolled[0][0] == report.dates[-1]
        assert rolled[0][1] == report.overall_mape

    def test_window_validation(self):
        report = error_report([1.0, 2.0])
        with pytest.raises(ValueError):
            rolling_mape(report, window_days=0)
        with pytest.raises(ValueError):
            rolling_mape(report, window_days=3)


def days_from(start, values):
    return [(start + dt.timedelta(days=i), v) for i, v in enumerate(values)]


class TestDriftState:
    def test_validation(self):
        with pytest.raises(ValueError):
            DriftState(baseline_mape=-0.1)
        with pytest.raises(ValueError):
            DriftState(baseline_mape=2.0, threshold_ratio=1.0)
        with pytest.raises(ValueError):
            DriftState(baseline_mape=2.0, rolling_window_days=0)
        with pytest.raises(ValueError):
            DriftState(baseline_mape=2.0, persistence_days=0)

    def test_defaults_match_operating_point(self):
        state = DriftState(baseline_mape=2.0)
        assert state.rolling_window_days == 30
        assert state.threshold_ratio == 1.5
        assert state.persistence_days == 7


class TestEvaluateDrift:
    def make_state(self, persistence=3):
        # baseline 2.0 x ratio 1.5 -> breach strictly above 3.0
        return DriftState(baseline_mape=2.0, threshold_ratio=1.5, persistence_days=persistence)

    def test_breach_reset_and_latch_sequence(self):
        values = [2.5, 3.5, 3.2, 3.0, 3.5, 3.6, 3.7, 2.0, 5.0]
        rolling = days_from(dt.date(2022, 6, 1), values)
        state, events = evaluate_drift(self.make_state(), rolling)
        assert [e.decision for e in events] == [
            "healthy",  # below limit
            "watch", "watch",
            "healthy",  # exactly at limit is not a breach; streak resets
            "watch", "watch",
            "retrain",  # third consecutive breach latches
            "retrain",  # sticky even though the error recovered
            "retrain",
        ]
        assert state.triggered
        assert all(e.baseline_mape == 2.0 for e in events)

    def test_consecutive_counter_caps_at_persistence(self):
        rolling = days_from(dt.date(2022, 6, 1), [9.0] * 10)
        state, events = evaluate_drift(self.make_state(persistence=3), rolling)
        assert state.consecutive_breaches == 3
        assert [e.decision for e in events] == ["watch", "watch"] + ["retrain"] * 8

    def test_recovery_resets_counter_but_not_trigger(self):
        state, _ = evaluate_drift(
            self.make_state(persistence=2),
            days_from(dt.date(2022, 6, 1), [4.0, 4.0, 1.0]),
        )
        assert state.consecutive_breaches == 0
        assert state.triggered

    def test_chunked_folding_matches_single_pass(self):
        values = [2.5, 3.5, 3.6, 2.0, 4.0, 4.1, 4.2, 1.0, 3.9]
        rolling = days_from(dt.date(2022, 6, 1), values)
        whole_state, whole_events = evaluate_drift(self.make_state(), rolling)
        mid_state, first = evaluate_drift(self.make_state(), rolling[:4])
        end_state, second = evaluate_drift(mid_state, rolling[4:])
        assert end_state == whole_state
        assert first + second == whole_events

    def test_empty_input_is_identity(self):
        state = self.make_state()
        out_state, events = evaluate_drift(state, [])
        assert out_state == state
        assert events == []


class TestEventLog:
    def test_round_trip_and_append(self, tmp_path):
        path = tmp_path / "events.jsonl"
        first = [
            DriftEvent(dt.date(2022, 6, 1), 2.5, 2.0, "healthy"),
            DriftEvent(dt.date(2022, 6, 2), 3.5, 2.0, "watch"),
        ]
        second = [DriftEvent(dt.date(2022, 6, 3), 4.5, 2.0, "retrain")]
        write_event_log(path, first)
        write_event_log(path, second)
        rows = read_event_log(path)
        assert rows == [
            {"date": "2022-06-01", "rolling_mape": 2.5, "baseline_mape": 2.0, "decision": "healthy"},
            {"date": "2022-06-02", "rolling_mape": 3.5, "baseline_mape": 2.0, "decision": "watch"},
            {"date": "2022-06-03", "rolling_mape": 4.5, "baseline_mape": 2.0, "decision": "retrain"},
        ]
