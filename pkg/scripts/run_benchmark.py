"""Reduced-size benchmark on the 4-year synthetic series.

Trains one flavor-0 model per family (widths capped so the whole run fits in
a coffee break) and compares day-ahead backtest MAPE against the previous-day
persistence and mean-day baselines over the final half year.

Usage:
    python scripts/run_benchmark.py --seed 7 --out runs/benchmark
"""

from __future__ import annotations

import argparse
import datetime as dt
import time
from pathlib import Path

from gridcast import (
    SyntheticSpec,
    TrainConfig,
    backtest_day_ahead,
    build_forecaster,
    generate_synthetic,
    train_forecaster,
)
from gridcast.backtest import append_registry, registry_row, save_report
from gridcast.baselines import MeanDayForecaster, PersistenceForecaster
from gridcast.series import concat

RECIPES = {
    "nbeats": dict(lookback=672, overrides={"stacks": 4, "layer_width": 32}, lr=1e-3),
    "lstm": dict(lookback=384, overrides={"hidden_dim": 32}, lr=3e-3),
    "tcn": dict(lookback=384, overrides={"num_filters": 8}, lr=3e-3),
    "psf": dict(lookback=None, overrides={"k_range": (2, 8), "restarts": 3}, lr=None),
}


class Split:
    def __init__(self, series, train_until, validation_days):
        cut = series.index_at(train_until)
        val_end = cut + validation_days * 96
        self.train = series.segment(0, cut)
        self.validation = series.segment(cut, val_end)
        self.test = series.segment(val_end, series.values.size)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--out", default="runs/benchmark")
    parser.add_argument("--max-epochs", type=int, default=150)
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    series = generate_synthetic(SyntheticSpec(start_year=2016, years=4), args.seed)
    ds = Split(series, dt.datetime(2019, 1, 1), validation_days=181)
    history = concat(ds.train, ds.validation)

    persistence = backtest_day_ahead(PersistenceForecaster(), history, ds.test)
    mean_day = backtest_day_ahead(MeanDayForecaster(), history, ds.test)
    print(f"baselines: persistence {persistence.overall_mape:.3f}%  mean-day {mean_day.overall_mape:.3f}%")

    for model_id, (family, recipe) in enumerate(RECIPES.items()):
        started = time.perf_counter()
        model = build_forecaster(family, 0, recipe["lookback"], seed=1, overrides=recipe["overrides"])
        cfg = None
        if recipe["lr"] is not None:
            cfg = TrainConfig(
                learning_rate=recipe["lr"], batch_size=128,
                max_epochs=args.max_epochs, patience=20, seed=0,
            )
        trained, stats = train_forecaster(model, ds, cfg)
        report = backtest_day_ahead(trained, history, ds.test, model_id=model_id, training_stats=stats)
        save_report(report, out / f"report_{family}.json")
        append_registry(out / "registry.jsonl", registry_row(report, family, 0, recipe["lookback"], stats))
        baseline = mean_day if family == "psf" else persistence
        beats = "beats" if report.overall_mape <= baseline.overall_mape else "LOSES TO"
        print(
            f"{family:<7} MAPE {report.overall_mape:.3f}%  epochs {stats.epochs_run:>3}  "
            f"{time.perf_counter() - started:5.0f}s  {beats} baseline {baseline.overall_mape:.3f}%"
        )
    print(f"reports and registry -> {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
