# Copyright (c) 2026, The pulse-soh authors. All rights reserved.
"""Command-line entry point of the pulse_soh package."""

import argparse
import asyncio
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

from loguru import logger as log
from pydantic import TypeAdapter, ValidationError

from pulse_soh.config import (
    DEFAULT_SMOOTHING_WINDOW,
    DEFAULT_T_MAX,
    DEFAULT_T_MIN,
    ESTIMATOR_KINDS,
    LOG_LEVEL,
    MAX_WORKERS,
)
from pulse_soh.estimator import evaluate_batteries, train
from pulse_soh.exceptions import (
    BatterySelectionError,
    DuplicateKeyError,
    ParseError,
    PulseSohError,
)
from pulse_soh.models import BatterySpec, DriftProfile, RunConfig
from pulse_soh.pipeline import (
    apply_corrections,
    build_features,
    compute_soh,
    join_fits,
    parameter_correlation,
    parameter_drift,
    trim_burn_in,
)
from pulse_soh.simbench import (
    default_campaign_specs,
    default_paper_profile,
    simulate_campaign,
)
from pulse_soh.utils import (
    launch_fit_tasks,
    read_corrections,
    read_cycles,
    read_features,
    read_model,
    read_params,
    read_pulse_trace,
    write_cycles,
    write_features,
    write_ground_truth,
    write_model,
    write_params,
    write_pulse_trace,
    write_report,
    write_residuals,
    write_table,
)


def _reference(value: str) -> Union[str, float]:
    if value == "per-battery-max":
        return value
    try:
        return float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected 'per-battery-max' or a capacity in Ah, got {value!r}"
        ) from None


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser with one subcommand per operation."""
    parser = argparse.ArgumentParser(
        prog="pulse-soh",
        description="State-of-health estimation from current-pulse responses.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    fit = commands.add_parser("fit", help="identify circuit parameters of pulse traces")
    fit.add_argument("inputs", nargs="+", type=Path, help="b<id>_c<cycle>.csv trace files")
    fit.add_argument("--out", type=Path, required=True, help="params CSV to write")
    fit.add_argument("--t-min", type=float, default=DEFAULT_T_MIN)
    fit.add_argument("--t-max", type=float, default=DEFAULT_T_MAX)
    fit.add_argument("--max-iterations", type=int, default=200)
    fit.add_argument("--workers", type=int, default=MAX_WORKERS)

    pipeline = commands.add_parser("pipeline", help="build training features")
    pipeline.add_argument("--params", type=Path, required=True)
    pipeline.add_argument("--cycles", type=Path, required=True)
    pipeline.add_argument("--corrections", type=Path)
    pipeline.add_argument("--window", type=int, default=DEFAULT_SMOOTHING_WINDOW)
    pipeline.add_argument("--reference", type=_reference, default="per-battery-max")
    pipeline.add_argument("--out", type=Path, required=True, help="features CSV to write")
    pipeline.add_argument("--correlation-out", type=Path)
    pipeline.add_argument("--drift-out", type=Path)

    for name, help_text in (("train", "train an estimator"), ("eval", "evaluate per battery")):
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("--features", type=Path, required=True)
        sub.add_argument("--kind", choices=ESTIMATOR_KINDS, default="ols")
        sub.add_argument("--train-ids", nargs="*", default=[])
        sub.add_argument("--seed", type=int, default=0)
        sub.add_argument("--max-subsets", type=int, default=10000)
        sub.add_argument("--out", type=Path, required=True)
        if name == "eval":
            sub.add_argument("--model", type=Path, help="trained model JSON")
            sub.add_argument("--test-ids", nargs="+", required=True)
            sub.add_argument("--residuals-out", type=Path)

    simulate = commands.add_parser("simulate", help="generate a synthetic campaign")
    simulate.add_argument("--spec", type=Path, help="JSON list of battery specs")
    simulate.add_argument("--profile", type=Path, help="JSON drift profile")
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument("--out-dir", type=Path, required=True)

    return parser


def _run_config(args: argparse.Namespace) -> RunConfig:
    extra_out = {
        key: getattr(args, f"{key}_out")
        for key in ("correlation", "drift", "residuals")
        if getattr(args, f"{key}_out", None) is not None
    }
    return RunConfig(
        command=args.command,
        inputs=getattr(args, "inputs", []),
        params_path=getattr(args, "params", None),
        cycles_path=getattr(args, "cycles", None),
        corrections_path=getattr(args, "corrections", None),
        features_path=getattr(args, "features", None),
        model_path=getattr(args, "model", None),
        spec_path=getattr(args, "spec", None),
        profile_path=getattr(args, "profile", None),
        out=getattr(args, "out", None),
        out_dir=getattr(args, "out_dir", None),
        extra_out=extra_out,
        t_min=getattr(args, "t_min", DEFAULT_T_MIN),
        t_max=getattr(args, "t_max", DEFAULT_T_MAX),
        max_iterations=getattr(args, "max_iterations", 200),
        window=getattr(args, "window", DEFAULT_SMOOTHING_WINDOW),
        reference=getattr(args, "reference", "per-battery-max"),
        kind=getattr(args, "kind", "ols"),
        train_ids=getattr(args, "train_ids", []),
        test_ids=getattr(args, "test_ids", []),
        seed=getattr(args, "seed", 0),
        max_subsets=getattr(args, "max_subsets", 10000),
        workers=getattr(args, "workers", None),
    )


def _estimator_options(config: RunConfig) -> Dict[str, int]:
    if config.kind == "theil_sen":
        return {"seed": config.seed, "max_subsets": config.max_subsets}
    return {}


def cmd_fit(config: RunConfig) -> int:
    """
    Fit every trace file and write the params CSV.

    Args:
        config (RunConfig): The run options

    Raises:
        DuplicateKeyError: If two files hold the same (battery_id, cycle_index)

    Returns:
        int: 0 if every file was read and fitted, 1 otherwise
    """
    traces, failures = [], 0
    seen: Dict[Tuple[str, int], Path] = {}
    for path in config.inputs:
        try:
            trace = read_pulse_trace(path)
        except ParseError as e:
            log.error(str(e))
            failures += 1
            continue
        key = (trace.battery_id, trace.cycle_index)
        if key in seen:
            raise DuplicateKeyError(
                f"battery {key[0]} cycle {key[1]} appears in {seen[key]} and {path}"
            )
        seen[key] = path
        traces.append(trace)

    results = asyncio.run(launch_fit_tasks(traces, config.fit_options(), config.workers))
    failures += sum(report is None for *_, report in results)
    write_params(results, config.out)
    log.info(f"wrote {len(results)} fit(s) to {config.out}, {failures} failure(s)")
    return 0 if failures == 0 else 1


def cmd_pipeline(config: RunConfig) -> int:
    """Join fits and cycles, label, trim and smooth, then write the features CSV."""
    records = sorted(read_cycles(config.cycles_path), key=lambda r: (r.battery_id, r.cycle_index))
    records = join_fits(records, read_params(config.params_path))
    corrections = read_corrections(config.corrections_path) if config.corrections_path else []
    records = apply_corrections(records, corrections)
    records = trim_burn_in(compute_soh(records, config.reference))

    fitted = [r for r in records if r.params is not None]
    if len(fitted) < len(records):
        log.warning(f"dropping {len(records) - len(fitted)} cycle(s) without fitted parameters")

    rows = build_features(fitted, config.window)
    write_features(rows, config.out)
    log.info(f"wrote {len(rows)} feature row(s) to {config.out}")

    if "correlation" in config.extra_out:
        write_table(parameter_correlation(fitted, config.window), config.extra_out["correlation"])
    if "drift" in config.extra_out:
        write_table(parameter_drift(rows), config.extra_out["drift"])
    return 0


def _rows_of(rows: List, ids: List[str]) -> List:
    missing = sorted(set(ids) - {r.battery_id for r in rows})
    if missing:
        raise BatterySelectionError(f"no feature rows for batteries {missing}")
    return [r for r in rows if r.battery_id in set(ids)]


def cmd_train(config: RunConfig) -> int:
    """Train an estimator on the selected batteries and write the model JSON."""
    rows = read_features(config.features_path)
    if config.train_ids:
        rows = _rows_of(rows, config.train_ids)
    model = train(rows, config.kind, **_estimator_options(config))
    write_model(model, config.out)
    meta = model.training_meta
    r2_text = "undefined" if meta.train_r2 is None else f"{meta.train_r2:.4f}"
    log.info(
        f"trained {model.kind} on batteries {meta.battery_ids} ({meta.row_count} rows): "
        f"MAE {meta.train_mae:.3f} %, R2 {r2_text}"
    )
    return 0


def cmd_eval(config: RunConfig) -> int:
    """
    Evaluate a model on each test battery and write the report CSVs.

    The model is read from --model, or trained on --train-ids when no
    model file is given.

    Args:
        config (RunConfig): The run options

    Raises:
        BatterySelectionError: Test batteries used in training, or no training batteries

    Returns:
        int: 0
    """
    rows = read_features(config.features_path)
    if config.model_path is not None:
        model = read_model(config.model_path)
    elif config.train_ids:
        model = train(_rows_of(rows, config.train_ids), config.kind, **_estimator_options(config))
    else:
        raise BatterySelectionError("eval needs --model or --train-ids")

    leaked = sorted(set(config.test_ids) & set(model.training_meta.battery_ids))
    if leaked:
        raise BatterySelectionError(f"test batteries {leaked} were used for training")

    reports = evaluate_batteries(model, _rows_of(rows, config.test_ids), config.test_ids)
    write_report(reports, config.out)
    if "residuals" in config.extra_out:
        write_residuals(reports, config.extra_out["residuals"])
    return 0


def cmd_simulate(config: RunConfig) -> int:
    """Simulate a campaign and write its traces, cycles log and ground truth."""
    if config.spec_path is not None:
        specs = TypeAdapter(List[BatterySpec]).validate_json(config.spec_path.read_text())
    else:
        specs = default_campaign_specs(config.seed)
    if config.profile_path is not None:
        profile = DriftProfile.model_validate_json(config.profile_path.read_text())
    else:
        profile = default_paper_profile()

    records, traces = simulate_campaign(specs, profile, config.seed)
    trace_dir = config.out_dir / "traces"
    trace_dir.mkdir(parents=True, exist_ok=True)
    for trace in traces:
        write_pulse_trace(trace, trace_dir)
    write_cycles(records, config.out_dir / "cycles.csv")
    write_ground_truth(records, config.out_dir / "ground_truth.csv")
    log.info(f"wrote {len(traces)} trace(s) and the cycles log to {config.out_dir}")
    return 0


COMMANDS: Dict[str, Callable[[RunConfig], int]] = {
    "fit": cmd_fit,
    "pipeline": cmd_pipeline,
    "train": cmd_train,
    "eval": cmd_eval,
    "simulate": cmd_simulate,
}


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run one subcommand.

    Args:
        argv (Optional[List[str]]): Arguments, sys.argv[1:] if None

    Returns:
        int: Exit status, 0 iff no operation errored
    """
    log.remove()
    log.add(sys.stderr, level=LOG_LEVEL)

    args = build_parser().parse_args(argv)
    try:
        config = _run_config(args)
    except ValidationError as e:
        log.error(f"invalid options: {e}")
        return 1

    try:
        return COMMANDS[config.command](config)
    except (PulseSohError, ValidationError) as e:
        log.error(f"{config.command} failed: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
