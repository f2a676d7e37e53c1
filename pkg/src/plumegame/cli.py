"""Command-line entry points.

Subcommands: ``synth`` builds a synthetic climate/pollution dataset,
``train`` fits the forecasting models, ``run`` executes simulations and
writes CSVs plus SVG figures, ``compare`` ranks completed run directories.

Exit codes: 0 success, 2 validation error, 3 I/O error, 4 training
non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .domain import (
    EMITTED_POLLUTANTS,
    POLLUTANT_ORDER,
    ScenarioConfig,
    Strategy,
    load_scenario,
    scenario_to_text,
    validate_scenario,
)
from .engine import ForecastModels, Metrics, Trajectory, compute_metrics, run
from .forecasting.mlp import TrainingError, make_training_samples, train_mlp
from .forecasting.preprocess import TimeSeriesDataset, load_dataset_csv, write_dataset_csv
from .forecasting.rbf import FEATURES, train_rbf
from .forecasting.synth import TABLE_STATS, ColumnStats, synthesize_dataset
from .plots import (
    plot_aq_series,
    plot_concentrations,
    plot_cooperation,
    plot_strategy_comparison,
)

TRAJECTORY_HEADER = (
    "step,hour,aq_index,pm10,sox,nox,co,o3,"
    "coop_all,coop_pm10,coop_sox,coop_nox,coop_co"
)

METRICS_HEADER = (
    "strategy,seed,final_aq_index,mean_aq_index,goal_met,"
    "aq_count_1,aq_count_2,aq_count_3,aq_count_4,aq_count_5,"
    "first_improvement_step,equilibrium_step,equilibrium_coop,"
    "final_coop_all,final_coop_pm10,final_coop_sox,final_coop_nox,final_coop_co,"
    "mean_reward_per_agent"
)

_STRATEGY_NAMES = [s.value for s in Strategy]


def _num(value) -> str:
    """Full-precision decimal text for CSV cells."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def write_trajectory_csv(path: Path, trajectory: Trajectory) -> None:
    with path.open("w", newline="") as fh:
        fh.write(TRAJECTORY_HEADER + "\n")
        hours = trajectory.hours
        for i in range(len(trajectory)):
            cells = [
                str(int(trajectory.steps[i])),
                _num(hours[i]),
                str(int(trajectory.aq_index[i])),
                *(_num(trajectory.concentrations[i, j]) for j in range(len(POLLUTANT_ORDER))),
                _num(trajectory.coop_all[i]),
                *(_num(trajectory.coop_by_pollutant[i, j]) for j in range(len(EMITTED_POLLUTANTS))),
            ]
            fh.write(",".join(cells) + "\n")


def metrics_row(metrics: Metrics) -> str:
    cells = [
        metrics.strategy.value,
        str(metrics.seed),
        str(metrics.final_aq_index),
        _num(metrics.mean_aq_index),
        _num(metrics.goal_met),
        *(str(int(c)) for c in metrics.aq_histogram),
        _num(metrics.first_improvement_step),
        _num(metrics.equilibrium_step),
        _num(metrics.equilibrium_coop),
        _num(metrics.final_coop_all),
        *(_num(metrics.final_coop_by_pollutant[p.value]) for p in EMITTED_POLLUTANTS),
        _num(metrics.mean_reward_per_agent),
    ]
    return ",".join(cells)


def _load_stats_overrides(path: Path) -> dict[str, ColumnStats]:
    """Stats file lines look like ``pm10_mean = 51.7``; unnamed fields keep
    their published defaults."""
    raw: dict[str, float] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ValueError(f"{path}:{lineno}: expected 'column_field = value'")
        key, value = (part.strip() for part in text.split("=", 1))
        raw[key] = float(value)
    stats: dict[str, ColumnStats] = {}
    for column, base in TABLE_STATS.items():
        stats[column] = ColumnStats(
            mean=raw.pop(f"{column}_mean", base.mean),
            std=raw.pop(f"{column}_std", base.std),
            max_value=raw.pop(f"{column}_max", base.max_value),
        )
    if raw:
        raise ValueError(f"{path}: unknown stats keys: {', '.join(sorted(raw))}")
    return stats


def cmd_synth(args) -> int:
    stats = _load_stats_overrides(Path(args.stats)) if args.stats else None
    dataset = synthesize_dataset(stats=stats, length=args.hours, seed=args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_dataset_csv(out, dataset)
    print(f"wrote {len(dataset)} hourly rows to {out}")
    return 0


def train_models(dataset: TimeSeriesDataset, out_dir: Path, horizon_hours: float,
                 max_centers: int, mlp_samples: int, seed: int) -> tuple[int, list[str]]:
    """Train and write all six models plus the validation report.

    Models that fail leave the others intact; the report records every
    outcome.  Returns (number of failures, report lines).
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    report = ["model,n_centers,validation_rmse,persistence_rmse,status"]
    failures = 0
    for pollutant in FEATURES:
        try:
            model = train_rbf(dataset, pollutant, horizon_hours, max_centers=max_centers)
            model.save(out_dir / f"rbf_{pollutant}.json")
            report.append(
                f"{pollutant},{model.n_centers},{_num(model.validation_rmse)},"
                f"{_num(model.persistence_rmse)},ok"
            )
        except (ValueError, TrainingError) as exc:
            failures += 1
            report.append(f"{pollutant},,,,failed: {exc}")
    try:
        samples, labels = make_training_samples(mlp_samples, seed=seed)
        mlp = train_mlp(samples, labels, seed=seed)
        mlp.save(out_dir / "mlp_aq.json")
        report.append(f"aq_index,,{_num(np.sqrt(mlp.train_mse))},,ok")
    except TrainingError as exc:
        failures += 1
        report.append(f"aq_index,,,,failed: {exc}")
    (out_dir / "report.csv").write_text("\n".join(report) + "\n")
    return failures, report


def cmd_train(args) -> int:
    dataset = load_dataset_csv(args.dataset)
    failures, report = train_models(
        dataset, Path(args.out), args.horizon, args.max_centers, args.mlp_samples, args.seed
    )
    print("\n".join(report))
    return 4 if failures else 0


def _parse_seed_args(args, config: ScenarioConfig) -> list[int]:
    if args.seeds and args.num_seeds:
        raise ValueError("give either --seeds or --num-seeds, not both")
    if args.seeds:
        return [int(s) for s in args.seeds.split(",")]
    if args.num_seeds:
        return [config.seed + k for k in range(args.num_seeds)]
    return [config.seed]


def cmd_run(args) -> int:
    config = load_scenario(args.scenario) if args.scenario else validate_scenario({})
    strategy_name = args.strategy or config.strategy.value
    strategies = list(Strategy) if strategy_name == "all" else [Strategy(strategy_name)]
    seeds = _parse_seed_args(args, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.dataset:
        dataset = load_dataset_csv(args.dataset)
        dataset_entry = {"path": str(args.dataset), "sha256": _sha256(Path(args.dataset))}
    else:
        dataset = synthesize_dataset(length=args.synth_hours, seed=args.synth_seed)
        dataset_entry = {
            "synthetic": {"hours": args.synth_hours, "seed": args.synth_seed},
            "sha256": None,
        }

    if args.train_first:
        models_dir = out / "models"
        failures, _ = train_models(dataset, models_dir, config.prediction_horizon_hours,
                                   args.max_centers, args.mlp_samples, config.seed)
        if failures:
            print("model training failed; see the report in the models directory",
                  file=sys.stderr)
            return 4
    else:
        models_dir = Path(args.models) if args.models else out / "models"

    try:
        models = ForecastModels.load(models_dir)
    except FileNotFoundError as exc:
        print(f"error: {exc}\nhint: plumegame train --dataset <csv> --out {models_dir}",
              file=sys.stderr)
        return 3

    scenario_text = scenario_to_text(config)
    manifest = {
        "format": "plumegame-run-manifest",
        "version": 1,
        "tool_version": __version__,
        "scenario": {
            "path": str(args.scenario) if args.scenario else None,
            "sha256": _sha256_text(scenario_text),
        },
        "dataset": dataset_entry,
        "models": {
            "dir": str(models_dir),
            "files": {p.name: _sha256(p) for p in sorted(models_dir.glob("*.json"))},
        },
        "strategies": [s.value for s in strategies],
        "seeds": seeds,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    (out / "scenario.txt").write_text(scenario_text)

    metrics_lines = [METRICS_HEADER]
    overlay_series: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    overlay_hist: dict[str, np.ndarray] = {}
    goals = {p.value: g for p, g in config.goal_levels().items()}
    for strategy in strategies:
        for seed in seeds:
            trajectory = run(config, models, dataset, strategy=strategy, seed=seed)
            metrics = compute_metrics(trajectory)
            run_dir = out / strategy.value / f"seed-{seed:04d}"
            run_dir.mkdir(parents=True, exist_ok=True)
            write_trajectory_csv(run_dir / "trajectory.csv", trajectory)
            plot_aq_series(trajectory.hours, trajectory.aq_index, trajectory.predicted_aq,
                           run_dir / "aq_index.svg",
                           title=f"Air quality index ({strategy.value}, seed {seed})")
            plot_concentrations(trajectory.hours, trajectory.concentrations, goals,
                                run_dir / "concentrations.svg")
            plot_cooperation(trajectory.hours, trajectory.coop_all,
                             trajectory.coop_by_pollutant, run_dir / "cooperation.svg",
                             title=f"Cooperating agents ({strategy.value}, seed {seed})")
            metrics_lines.append(metrics_row(metrics))
            if seed == seeds[0]:
                overlay_series[strategy.value] = (trajectory.hours, trajectory.aq_index)
                overlay_hist[strategy.value] = metrics.aq_histogram
            print(f"ran {strategy.value} seed {seed}: final index {metrics.final_aq_index}, "
                  f"final cooperation {metrics.final_coop_all:.3f}")

    (out / "metrics.csv").write_text("\n".join(metrics_lines) + "\n")
    if len(strategies) > 1:
        plot_strategy_comparison(overlay_series, overlay_hist, out / "comparison.svg")
    print(f"results in {out}")
    return 0


def _read_metrics_csv(path: Path) -> list[dict]:
    with path.open(newline="") as fh:
        return list(csv.DictReader(fh))


def cmd_compare(args) -> int:
    directories = [Path(d) for d in args.dirs]
    if len(directories) < 2:
        raise ValueError("need at least two completed run directories to compare")
    scenario_hash = None
    rows: list[dict] = []
    for directory in directories:
        manifest_path = directory / "manifest.json"
        metrics_path = directory / "metrics.csv"
        if not manifest_path.exists() or not metrics_path.exists():
            raise FileNotFoundError(f"{directory} is not a completed run directory")
        manifest = json.loads(manifest_path.read_text())
        this_hash = manifest["scenario"]["sha256"]
        if scenario_hash is None:
            scenario_hash = this_hash
        elif this_hash != scenario_hash:
            raise ValueError(
                f"{directory} ran a different scenario (hash {this_hash[:12]} != {scenario_hash[:12]}); refusing to compare"
            )
        rows.extend(_read_metrics_csv(metrics_path))

    by_strategy: dict[str, list[dict]] = {}
    for row in rows:
        by_strategy.setdefault(row["strategy"], []).append(row)

    table = []
    for name, entries in by_strategy.items():
        finals = [float(e["final_aq_index"]) for e in entries]
        means = [float(e["mean_aq_index"]) for e in entries]
        hist = np.sum([[int(e[f"aq_count_{i}"]) for i in range(1, 6)] for e in entries], axis=0)
        eq_steps = [float(e["equilibrium_step"]) for e in entries if e["equilibrium_step"]]
        eq_coops = [float(e["equilibrium_coop"]) for e in entries if e["equilibrium_coop"]]
        table.append({
            "strategy": name,
            "runs": len(entries),
            "mean_final_aq": float(np.mean(finals)),
            "mean_aq": float(np.mean(means)),
            "histogram": hist,
            "equilibrium_step": float(np.mean(eq_steps)) if eq_steps else None,
            "equilibrium_coop": float(np.mean(eq_coops)) if eq_coops else None,
        })
    table.sort(key=lambda r: (r["mean_final_aq"], r["mean_aq"]))

    header = (f"{'strategy':8s} {'runs':>4s} {'final_aq':>8s} {'mean_aq':>8s} "
              f"{'aq occurrences 1..5':>24s} {'eq_step':>8s} {'eq_coop':>8s}")
    print(header)
    print("-" * len(header))
    for row in table:
        eq_step = f"{row['equilibrium_step']:.0f}" if row["equilibrium_step"] is not None else "-"
        eq_coop = f"{row['equilibrium_coop']:.3f}" if row["equilibrium_coop"] is not None else "-"
        hist = "/".join(str(int(v)) for v in row["histogram"])
        print(f"{row['strategy']:8s} {row['runs']:4d} {row['mean_final_aq']:8.3f} "
              f"{row['mean_aq']:8.3f} {hist:>24s} {eq_step:>8s} {eq_coop:>8s}")
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        lines = ["strategy,runs,mean_final_aq,mean_aq,aq_count_1,aq_count_2,aq_count_3,"
                 "aq_count_4,aq_count_5,equilibrium_step,equilibrium_coop"]
        for row in table:
            lines.append(",".join([
                row["strategy"], str(row["runs"]), _num(row["mean_final_aq"]),
                _num(row["mean_aq"]), *(str(int(v)) for v in row["histogram"]),
                _num(row["equilibrium_step"]), _num(row["equilibrium_coop"]),
            ]))
        out.write_text("\n".join(lines) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plumegame",
        description="Multi-agent air pollution simulator with plume dispersion, "
                    "neural forecasting and an evolutionary emission game.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic hourly dataset CSV")
    p_synth.add_argument("--out", required=True, help="output CSV path")
    p_synth.add_argument("--hours", type=int, default=17520, help="number of hourly rows")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--stats", help="key-value file overriding column statistics")
    p_synth.set_defaults(func=cmd_synth)

    p_train = sub.add_parser("train", help="train the forecasting models")
    p_train.add_argument("--dataset", required=True, help="hourly dataset CSV")
    p_train.add_argument("--out", required=True, help="directory for model files")
    p_train.add_argument("--horizon", type=float, default=2.0, help="forecast horizon, hours")
    p_train.add_argument("--max-centers", type=int, default=60)
    p_train.add_argument("--mlp-samples", type=int, default=6000)
    p_train.add_argument("--seed", type=int, default=1)
    p_train.set_defaults(func=cmd_train)

    p_run = sub.add_parser("run", help="run simulations and export results")
    p_run.add_argument("--scenario", help="scenario key-value file (defaults built in)")
    p_run.add_argument("--strategy", choices=_STRATEGY_NAMES + ["all"], default=None,
                       help="cooperation strategy (default: scenario's)")
    p_run.add_argument("--seeds", help="comma-separated explicit seed list")
    p_run.add_argument("--num-seeds", type=int,
                       help="run this many seeds, scenario seed + 0..N-1")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--models", help="directory holding trained model files")
    p_run.add_argument("--dataset", help="hourly dataset CSV driving the climate")
    p_run.add_argument("--train-first", action="store_true",
                       help="train models into <out>/models before running")
    p_run.add_argument("--synth-hours", type=int, default=17520,
                       help="length of the fallback synthetic dataset")
    p_run.add_argument("--synth-seed", type=int, default=0)
    p_run.add_argument("--max-centers", type=int, default=60)
    p_run.add_argument("--mlp-samples", type=int, default=6000)
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="rank completed run directories")
    p_cmp.add_argument("dirs", nargs="+", help="run output directories")
    p_cmp.add_argument("--out", help="also write the ranking as CSV")
    p_cmp.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
