"""Command-line pipeline: synth / ingest / features / train / backtest / grid / monitor / report.

Exit codes: 0 success, 1 runtime error, 2 usage error. `--json` switches
stdout to machine-readable output. `GRIDCAST_SEED` provides the seed when
`--seed` is absent.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

from .backtest import SEASONS, backtest_day_ahead, load_report, save_report
from .configfile import RunConfig, parse_config
from .covariates import COVARIATE_COLUMNS, build_matrix
from .drift import DriftState, evaluate_drift, rolling_mape, write_event_log
from .errors import ConfigError, GridcastError
from .experiment import ExperimentSpec, resolve_dataset, run_experiment_grid
from .models import build_forecaster, load_forecaster, save_forecaster, train_forecaster
from .series import STEP, SyntheticSpec, concat, generate_synthetic, ingest_csv, read_holidays, wrangle


def _resolve_seed(args, cfg: RunConfig | None) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("GRIDCAST_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"GRIDCAST_SEED={env!r} is not an integer") from None
    if cfg is not None:
        return cfg.training.seed
    return 0


def _load_config(args) -> RunConfig | None:
    path = getattr(args, "config", None)
    return parse_config(path) if path else None


def _out_dir(args) -> Path:
    out = Path(getattr(args, "out", None) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(args, payload: dict, text_lines: list[str]) -> None:
    if args.json:
        print(json.dumps(payload))
    else:
        for line in text_lines:
            print(line)


def _write_series_csv(path: Path, series) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "load_mw"])
        ts = series.start
        for value in series.values:
            writer.writerow([ts.strftime("%Y-%m-%dT%H:%M"), f"{value:.6f}"])
            ts += STEP


def _cmd_synth(args) -> int:
    cfg = _load_config(args)
    seed = _resolve_seed(args, cfg)
    spec = cfg.synthetic if cfg and cfg.synthetic else SyntheticSpec()
    series = generate_synthetic(spec, seed)
    out = _out_dir(args) / "synthetic.csv"
    _write_series_csv(out, series)
    _emit(
        args,
        {"path": str(out), "rows": int(series.values.size), "start": series.start.isoformat(), "end": series.end.isoformat()},
        [f"wrote {series.values.size} samples ({series.start} .. {series.end}) to {out}"],
    )
    return 0


def _require_data_csv(args, cfg: RunConfig | None) -> str:
    if getattr(args, "data", None):
        return args.data
    if cfg and cfg.data.csv:
        return cfg.data.csv
    raise ConfigError("no input CSV: pass --data or set [data] csv in the config")


def _cmd_ingest(args) -> int:
    cfg = _load_config(args)
    raw = ingest_csv(_require_data_csv(args, cfg))
    series = wrangle(raw)
    out = _out_dir(args) / "clean.csv"
    _write_series_csv(out, series)
    filled = series.values.size - len(raw.entries)
    _emit(
        args,
        {
            "path": str(out),
            "rows": int(series.values.size),
            "interpolated": int(max(filled, 0)),
            "start": series.start.isoformat(),
            "end": series.end.isoformat(),
        },
        [f"clean series: {series.values.size} samples, {max(filled, 0)} interpolated -> {out}"],
    )
    return 0


def _cmd_features(args) -> int:
    cfg = _load_config(args)
    series = wrangle(ingest_csv(_require_data_csv(args, cfg)))
    holidays_path = getattr(args, "holidays", None) or (cfg.data.holidays if cfg else None)
    holidays = read_holidays(holidays_path) if holidays_path else frozenset()
    matrix = build_matrix(series, holidays)
    out = _out_dir(args) / "features.csv"
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp"] + list(COVARIATE_COLUMNS))
        ts = series.start
        for row in matrix:
            writer.writerow([ts.strftime("%Y-%m-%dT%H:%M")] + [f"{v:.6f}" for v in row])
            ts += STEP
    _emit(
        args,
        {"path": str(out), "rows": int(matrix.shape[0]), "columns": len(COVARIATE_COLUMNS) + 1},
        [f"wrote {matrix.shape[0]} rows x {len(COVARIATE_COLUMNS)} covariates to {out}"],
    )
    return 0


def _single_cell(cfg: RunConfig):
    sel = cfg.models
    family = sel.families[0]
    flavor = sel.flavors[0]
    lookback = None if family == "psf" else sel.lookbacks[0]
    return family, flavor, lookback


def _cmd_train(args) -> int:
    cfg = _load_config(args)
    if cfg is None:
        raise ConfigError("train needs --config")
    seed = _resolve_seed(args, cfg)
    dataset, holidays = resolve_dataset(cfg, seed)
    family, flavor, lookback = _single_cell(cfg)
    from .experiment import _family_overrides  # shared filtering logic

    model = build_forecaster(family, flavor, lookback, seed=seed, overrides=_family_overrides(family, cfg.models.overrides))
    train_cfg = cfg.training
    if not cfg.explicit_lr:
        flavor_lr = getattr(getattr(model, "cfg", None), "learning_rate", None)
        if flavor_lr is not None:
            from dataclasses import replace

            train_cfg = replace(train_cfg, learning_rate=flavor_lr)
    trained, stats = train_forecaster(model, dataset, train_cfg, holidays)
    out = _out_dir(args) / f"model_{family}_{flavor}.json"
    save_forecaster(trained, out, meta={"family": family, "flavor": flavor, "lookback": lookback, "seed": seed})
    best_val = stats.best_validation_loss
    _emit(
        args,
        {
            "path": str(out),
            "family": family,
            "flavor": flavor,
            "lookback": lookback,
            "epochs": stats.epochs_run,
            "best_validation_loss": best_val if math.isfinite(best_val) else None,
            "wall_seconds": stats.wall_seconds if cfg.timing == "wall" else 0.0,
        },
        [
            f"trained {family} flavor {flavor} (lookback {lookback}) in {stats.epochs_run} epochs",
            f"checkpoint -> {out}",
        ],
    )
    return 0


def _cmd_backtest(args) -> int:
    cfg = _load_config(args)
    if cfg is None:
        raise ConfigError("backtest needs --config for the data and split")
    seed = _resolve_seed(args, cfg)
    dataset, holidays = resolve_dataset(cfg, seed)
    model = load_forecaster(args.model)
    history = concat(dataset.train, dataset.validation)
    report = backtest_day_ahead(model, history, dataset.test, holidays, model_id=Path(args.model).stem)
    out = _out_dir(args) / "report.json"
    save_report(report, out)
    seasonal = {s: report.per_season_mape.get(s) for s in SEASONS}
    _emit(
        args,
        {"path": str(out), "overall_mape": report.overall_mape, "seasonal": seasonal, "days": report.n_days},
        [f"overall MAPE {report.overall_mape:.3f}% over {report.n_days} days -> {out}"]
        + [f"  {s}: {v:.3f}%" if v is not None else f"  {s}: n/a" for s, v in seasonal.items()],
    )
    return 0


def _cmd_grid(args) -> int:
    cfg = _load_config(args)
    if cfg is None:
        raise ConfigError("grid needs --config")
    seed = _resolve_seed(args, cfg)
    out = _out_dir(args)
    spec = ExperimentSpec(config=cfg, out_dir=out, seed=seed, jobs=args.jobs)
    rows, failures = run_experiment_grid(spec)
    payload = {"registry": str(out / "registry.jsonl"), "rows": rows, "failures": failures}
    lines = [f"{len(rows)} runs -> {out / 'registry.jsonl'}"]
    for row in rows:
        lines.append(
            f"  model {row['model_id']:>2} {row['family']:<7} flavor {row['flavor']} "
            f"lookback {str(row['lookback']):>4}: MAPE {row['overall_mape']:.3f}%"
        )
    if failures:
        lines.append(f"{len(failures)} failed cells -> {out / 'failures.jsonl'}")
        for f in failures:
            lines.append(f"  model {f['model_id']}: {f['error']}")
    _emit(args, payload, lines)
    all_cells_failed = bool(failures) and not rows
    return 1 if all_cells_failed else 0


def _cmd_monitor(args) -> int:
    cfg = _load_config(args)
    report = load_report(args.report)
    mon = cfg.monitor if cfg else None
    baseline = args.baseline if args.baseline is not None else (mon.baseline_mape if mon else None)
    if baseline is None:
        raise ConfigError("monitor needs a baseline MAPE: pass --baseline or set [monitor] baseline_mape")
    state = DriftState(
        baseline_mape=baseline,
        rolling_window_days=mon.window_days if mon else 30,
        threshold_ratio=mon.threshold_ratio if mon else 1.5,
        persistence_days=mon.persistence_days if mon else 7,
    )
    rolling = rolling_mape(report, state.rolling_window_days)
    state, events = evaluate_drift(state, rolling)
    out = _out_dir(args) / "events.jsonl"
    write_event_log(out, events)
    decision = events[-1].decision if events else "healthy"
    trigger_date = next((e.date.isoformat() for e in events if e.decision == "retrain"), None)
    _emit(
        args,
        {
            "path": str(out),
            "decision": decision,
            "triggered": state.triggered,
            "trigger_date": trigger_date,
            "events": len(events),
        },
        [
            f"{len(events)} monitored days -> {out}",
            f"decision: {decision}" + (f" (first retrain signal {trigger_date})" if trigger_date else ""),
        ],
    )
    return 0


def _cmd_report(args) -> int:
    path = Path(args.registry)
    if not path.exists():
        raise ConfigError(f"registry {path} does not exist")
    from .backtest import read_registry

    rows = sorted(read_registry(path), key=lambda r: (r["model_id"] is None, r["model_id"]))
    if args.json:
        print(json.dumps(rows))
        return 0
    header = f"{'id':>3} {'family':<8} {'flavor':>6} {'lookback':>8} {'MAPE%':>8} {'epochs':>6} " + " ".join(
        f"{s[:3]:>7}" for s in SEASONS
    )
    print(header)
    print("-" * len(header))
    for r in rows:
        seas = " ".join(
            f"{r['seasonal'][s]:>7.3f}" if r["seasonal"].get(s) is not None else f"{'n/a':>7}" for s in SEASONS
        )
        print(
            f"{r['model_id']:>3} {r['family']:<8} {r['flavor']:>6} {str(r['lookback']):>8} "
            f"{r['overall_mape']:>8.3f} {r['epochs']:>6} {seas}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridcast",
        description="Day-ahead load forecasting: data prep, model grid, backtesting, drift monitoring.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", help="INI run configuration")
        p.add_argument("--seed", type=int, default=None, help="seed (falls back to GRIDCAST_SEED, then config)")
        p.add_argument("--out", help="output directory (default: current directory)")
        p.add_argument("--json", action="store_true", help="machine-readable stdout")

    p = sub.add_parser("synth", help="generate a synthetic load CSV")
    common(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("ingest", help="parse, dedupe, and gap-fill a load CSV")
    common(p)
    p.add_argument("--data", help="input CSV (timestamp,load_mw)")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("features", help="emit the calendar covariate matrix for a CSV")
    common(p)
    p.add_argument("--data", help="input CSV (timestamp,load_mw)")
    p.add_argument("--holidays", help="holiday dates file, one ISO date per line")
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("train", help="train the single model selected by the config")
    common(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("backtest", help="day-ahead backtest of a saved model on the test split")
    common(p)
    p.add_argument("--model", required=True, help="model checkpoint JSON")
    p.set_defaults(func=_cmd_backtest)

    p = sub.add_parser("grid", help="run the full experiment grid into a run registry")
    common(p)
    p.add_argument("--jobs", type=int, default=1, help="parallel grid cells")
    p.set_defaults(func=_cmd_grid)

    p = sub.add_parser("monitor", help="evaluate drift decisions over a backtest report")
    common(p)
    p.add_argument("--report", required=True, help="report JSON from the backtest command")
    p.add_argument("--baseline", type=float, default=None, help="baseline MAPE percent")
    p.set_defaults(func=_cmd_monitor)

    p = sub.add_parser("report", help="render a run registry as a table")
    p.add_argument("--registry", required=True, help="registry JSON-lines file")
    p.add_argument("--json", action="store_true", help="machine-readable stdout")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 2
    try:
        return args.func(args)
    except GridcastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
