# Copyright (c) 2026, The pulse-soh authors. All rights reserved.
"""File formats and the concurrent fit fan-out of the pulse_soh package."""

import asyncio
import json
import re
from concurrent.futures import Executor, ThreadPoolExecutor
from functools import partial
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import pandas as pd
from loguru import logger as log
from pydantic import ValidationError

from pulse_soh.config import (
    CORRECTIONS_COLUMNS,
    CYCLES_COLUMNS,
    FEATURES_COLUMNS,
    FLOAT_FORMAT,
    GROUND_TRUTH_COLUMNS,
    PARAM_NAMES,
    PARAMS_COLUMNS,
    REPORT_COLUMNS,
    RESIDUALS_COLUMNS,
    TRACE_ABSOLUTE_COLUMNS,
    TRACE_COLUMNS,
)
from pulse_soh.exceptions import DuplicateKeyError, ParseError, PulseSohError
from pulse_soh.identify import fit_pulse
from pulse_soh.models import (
    Correction,
    CycleRecord,
    EcmParams,
    EvalReport,
    FeatureRow,
    FitOptions,
    FitReport,
    PulseTrace,
    SohModel,
)


FitResult = Tuple[str, int, Optional[FitReport]]
PathLike = Union[str, Path]

_TRACE_NAME = re.compile(r"^b(?P<battery_id>.+)_c(?P<cycle_index>\d+)\.csv$")


def parse_trace_filename(path: PathLike) -> Tuple[str, int]:
    """
    Extract (battery_id, cycle_index) from a `b<battery_id>_c<cycle_index>.csv` name.

    Args:
        path (PathLike): The trace file path

    Raises:
        ParseError: If the name does not follow the pattern

    Returns:
        Tuple[str, int]: The battery id and the cycle index
    """
    match = _TRACE_NAME.match(Path(path).name)
    if match is None:
        raise ParseError(str(path), None, "file name is not b<battery_id>_c<cycle_index>.csv")
    return match["battery_id"], int(match["cycle_index"])


def trace_filename(battery_id: str, cycle_index: int) -> str:
    """File name of the pulse trace of one cycle."""
    return f"b{battery_id}_c{cycle_index}.csv"


def _read_table(path: PathLike, *headers: Sequence[str]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise ParseError(str(path), 1, "empty file, a header line is required") from None
    except pd.errors.ParserError as e:
        raise ParseError(str(path), None, str(e)) from None

    if list(frame.columns) not in [list(h) for h in headers]:
        expected = " or ".join(",".join(h) for h in headers)
        raise ParseError(
            str(path), 1, f"unexpected header {','.join(frame.columns)}, expected {expected}"
        )
    return frame


def _column(
    frame: pd.DataFrame, path: PathLike, name: str, kind: type = float, optional: bool = False
) -> List:
    values = []
    for row, raw in enumerate(frame[name].tolist()):
        if optional and raw == "":
            values.append(None)
            continue
        try:
            value = float(raw)
            if kind is int:
                if not value.is_integer():
                    raise ValueError
                value = int(value)
        except ValueError:
            raise ParseError(str(path), row + 2, f"{name}: cannot parse {raw!r}") from None
        values.append(value)
    return values


def _flag_column(frame: pd.DataFrame, path: PathLike, name: str) -> List[bool]:
    flags = []
    for row, raw in enumerate(frame[name].tolist()):
        lowered = raw.strip().lower()
        if lowered not in ("true", "false"):
            raise ParseError(str(path), row + 2, f"{name}: expected true or false, got {raw!r}")
        flags.append(lowered == "true")
    return flags


def _check_unique(path: PathLike, keys: Sequence[Tuple[str, int]]) -> None:
    seen = set()
    for row, key in enumerate(keys):
        if key in seen:
            raise DuplicateKeyError(
                f"{path}:{row + 2}: duplicated (battery_id, cycle_index) = ({key[0]}, {key[1]})"
            )
        seen.add(key)


def _write_table(frame: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def _frame(rows: List[Dict], columns: Sequence[str]) -> pd.DataFrame:
    return pd.DataFrame(rows, columns=list(columns))


def read_pulse_trace(path: PathLike) -> PulseTrace:
    """
    Read one pulse trace CSV.

    The battery id and cycle index come from the file name. The file holds
    either a voltage_delta_v column or an absolute voltage_v column, the
    latter with pre-pulse samples at t < 0.

    Args:
        path (PathLike): A `b<battery_id>_c<cycle_index>.csv` file

    Raises:
        ParseError: Bad file name, header or value, or a trace that fails validation

    Returns:
        PulseTrace: The trace
    """
    battery_id, cycle_index = parse_trace_filename(path)
    frame = _read_table(path, TRACE_COLUMNS, TRACE_ABSOLUTE_COLUMNS)
    t = _column(frame, path, "t_s")
    current = _column(frame, path, "current_a")
    absolute = "voltage_v" in frame.columns
    voltage = _column(frame, path, "voltage_v" if absolute else "voltage_delta_v")
    try:
        if absolute:
            return PulseTrace.from_terminal_voltage(
                t, current, voltage, battery_id=battery_id, cycle_index=cycle_index
            )
        return PulseTrace(
            t=tuple(t),
            current=tuple(current),
            voltage_delta=tuple(voltage),
            battery_id=battery_id,
            cycle_index=cycle_index,
        )
    except ValueError as e:
        raise ParseError(str(path), None, f"invalid pulse trace: {e}") from None


def write_pulse_trace(trace: PulseTrace, directory: PathLike) -> Path:
    """Write a trace as `<directory>/b<battery_id>_c<cycle_index>.csv` and return the path."""
    frame = pd.DataFrame(
        {"t_s": trace.t, "current_a": trace.current, "voltage_delta_v": trace.voltage_delta},
        columns=TRACE_COLUMNS,
    )
    return _write_table(
        frame, Path(directory) / trace_filename(trace.battery_id, trace.cycle_index)
    )


def read_cycles(path: PathLike) -> List[CycleRecord]:
    """
    Read the cycles log: battery_id, cycle_index, discharged_ah.

    Args:
        path (PathLike): The CSV file

    Raises:
        ParseError: Bad header or value
        DuplicateKeyError: If a (battery_id, cycle_index) appears twice

    Returns:
        List[CycleRecord]: In file order
    """
    frame = _read_table(path, CYCLES_COLUMNS)
    ids = frame["battery_id"].tolist()
    cycles = _column(frame, path, "cycle_index", int)
    capacities = _column(frame, path, "discharged_ah")
    _check_unique(path, list(zip(ids, cycles, strict=True)))

    records = []
    for row, (battery_id, cycle_index, ah) in enumerate(
        zip(ids, cycles, capacities, strict=True)
    ):
        try:
            records.append(
                CycleRecord(battery_id=battery_id, cycle_index=cycle_index, discharged_ah=ah)
            )
        except ValidationError as e:
            raise ParseError(str(path), row + 2, str(e.errors()[0]["msg"])) from None
    return records


def write_cycles(records: Sequence[CycleRecord], path: PathLike) -> Path:
    """Write the cycles log of some records."""
    rows = [
        {
            "battery_id": r.battery_id,
            "cycle_index": r.cycle_index,
            "discharged_ah": r.discharged_ah,
        }
        for r in records
    ]
    return _write_table(_frame(rows, CYCLES_COLUMNS), path)


def write_ground_truth(records: Sequence[CycleRecord], path: PathLike) -> Path:
    """Write the true parameters and SoH of simulated records."""
    rows = [
        {
            "battery_id": r.battery_id,
            "cycle_index": r.cycle_index,
            **(r.params.model_dump() if r.params is not None else {}),
            "soh_percent": r.soh_percent,
        }
        for r in records
    ]
    return _write_table(_frame(rows, GROUND_TRUTH_COLUMNS), path)


def write_params(results: Sequence[FitResult], path: PathLike) -> Path:
    """
    Write one row per fitted pulse; failed fits keep empty numeric fields.

    Args:
        results (Sequence[FitResult]): (battery_id, cycle_index, report or None)
        path (PathLike): The CSV file

    Returns:
        Path: The written file
    """
    rows = []
    for battery_id, cycle_index, report in results:
        row = {"battery_id": battery_id, "cycle_index": cycle_index, "converged": "false"}
        if report is not None:
            row.update(report.params.model_dump())
            row.update(
                sse=report.sse,
                converged=str(report.converged).lower(),
                residual_rms=report.residual_rms,
                condition_warning=str(report.condition_warning).lower(),
                residual_autocorr=report.residual_autocorr,
            )
        else:
            row["condition_warning"] = "false"
        rows.append(row)
    return _write_table(_frame(rows, PARAMS_COLUMNS), path)


def read_params(path: PathLike) -> Dict[Tuple[str, int], EcmParams]:
    """
    Read a params CSV into parameters keyed by (battery_id, cycle_index).

    Rows of failed fits (empty parameter fields) are skipped with a warning.

    Args:
        path (PathLike): The CSV written by write_params

    Raises:
        ParseError: Bad header or value
        DuplicateKeyError: If a key appears twice

    Returns:
        Dict[Tuple[str, int], EcmParams]: The fitted parameters
    """
    frame = _read_table(path, PARAMS_COLUMNS)
    cycles = _column(frame, path, "cycle_index", int)
    keys = list(zip(frame["battery_id"].tolist(), cycles, strict=True))
    _check_unique(path, keys)
    _flag_column(frame, path, "converged")
    columns = {name: _column(frame, path, name, optional=True) for name in PARAM_NAMES}

    fits = {}
    skipped = 0
    for row, key in enumerate(keys):
        values = [columns[name][row] for name in PARAM_NAMES]
        if any(v is None for v in values):
            skipped += 1
            continue
        try:
            fits[key] = EcmParams.from_array(values)
        except ValidationError as e:
            raise ParseError(str(path), row + 2, str(e.errors()[0]["msg"])) from None
    if skipped:
        log.warning(f"{path}: skipped {skipped} row(s) without fitted parameters")
    return fits


def read_corrections(path: PathLike) -> List[Correction]:
    """Read the corrections CSV: battery_id, cycle_from, cycle_to, delta_ah."""
    frame = _read_table(path, CORRECTIONS_COLUMNS)
    ids = frame["battery_id"].tolist()
    starts = _column(frame, path, "cycle_from", int)
    ends = _column(frame, path, "cycle_to", int)
    deltas = _column(frame, path, "delta_ah")
    corrections = []
    for row, values in enumerate(zip(ids, starts, ends, deltas, strict=True)):
        try:
            corrections.append(Correction(**dict(zip(CORRECTIONS_COLUMNS, values, strict=True))))
        except ValidationError as e:
            raise ParseError(str(path), row + 2, str(e.errors()[0]["msg"])) from None
    return corrections


def write_features(rows: Sequence[FeatureRow], path: PathLike) -> Path:
    """Write feature rows."""
    return _write_table(_frame([r.model_dump() for r in rows], FEATURES_COLUMNS), path)


def read_features(path: PathLike) -> List[FeatureRow]:
    """
    Read a features CSV.

    Args:
        path (PathLike): The CSV written by write_features

    Raises:
        ParseError: Bad header or value
        DuplicateKeyError: If a key appears twice

    Returns:
        List[FeatureRow]: In file order
    """
    frame = _read_table(path, FEATURES_COLUMNS)
    columns = {
        "battery_id": frame["battery_id"].tolist(),
        "cycle_index": _column(frame, path, "cycle_index", int),
        **{name: _column(frame, path, name) for name in FEATURES_COLUMNS[2:]},
    }
    _check_unique(path, list(zip(columns["battery_id"], columns["cycle_index"], strict=True)))
    rows = []
    for row in range(len(frame)):
        try:
            rows.append(FeatureRow(**{name: columns[name][row] for name in FEATURES_COLUMNS}))
        except ValidationError as e:
            raise ParseError(str(path), row + 2, str(e.errors()[0]["msg"])) from None
    return rows


def write_table(frame: pd.DataFrame, path: PathLike) -> Path:
    """Write an analysis table such as the correlation or drift table."""
    return _write_table(frame, path)


def write_report(reports: Dict[str, EvalReport], path: PathLike) -> Path:
    """Write one row per evaluated battery."""
    rows = [
        {"battery_id": battery_id, **score.model_dump()}
        for report in reports.values()
        for battery_id, score in report.per_battery.items()
    ]
    return _write_table(_frame(rows, REPORT_COLUMNS), path)


def write_residuals(reports: Dict[str, EvalReport], path: PathLike) -> Path:
    """Write the per-cycle residuals of every report."""
    rows = [point.model_dump() for report in reports.values() for point in report.residuals]
    return _write_table(_frame(rows, RESIDUALS_COLUMNS), path)


def write_model(model: SohModel, path: PathLike) -> Path:
    """Write a model as JSON; floats keep their shortest exact representation."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(model.model_dump(), indent=2) + "\n")
    return path


def read_model(path: PathLike) -> SohModel:
    """
    Read a model JSON written by write_model.

    Args:
        path (PathLike): The JSON file

    Raises:
        ParseError: If the file is not valid JSON or not a model

    Returns:
        SohModel: The model
    """
    try:
        return SohModel.model_validate(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as e:
        raise ParseError(str(path), e.lineno, e.msg) from None
    except ValidationError as e:
        raise ParseError(str(path), None, f"invalid model: {e.errors()[0]['msg']}") from None


async def _fit_task(
    trace: PulseTrace, options: FitOptions, executor: Optional[Executor]
) -> FitResult:
    """
    Fit one trace in the executor.

    Args:
        trace (PulseTrace): The pulse to fit
        options (FitOptions): Solver settings
        executor (Optional[Executor]): Executor to run the fit in, loop default if None

    Returns:
        FitResult: The key of the trace and its report, None if the fit failed
    """
    try:
        report = await asyncio.get_event_loop().run_in_executor(
            executor, partial(fit_pulse, trace=trace, options=options)
        )
    except PulseSohError as e:
        log.error(f"battery {trace.battery_id} cycle {trace.cycle_index}: fit failed: {e}")
        return trace.battery_id, trace.cycle_index, None

    if report.condition_warning:
        log.warning(
            f"battery {trace.battery_id} cycle {trace.cycle_index}: ill-conditioned fit"
        )
    return trace.battery_id, trace.cycle_index, report


async def launch_fit_tasks(
    traces: Sequence[PulseTrace],
    options: Optional[FitOptions] = None,
    max_workers: Optional[int] = None,
) -> List[FitResult]:
    """
    Fit every trace concurrently and return the results sorted by key.

    Args:
        traces (Sequence[PulseTrace]): The pulses to fit
        options (Optional[FitOptions]): Solver settings, defaults if None
        max_workers (Optional[int]): Worker threads, the loop default executor if None

    Returns:
        List[FitResult]: One (battery_id, cycle_index, report or None) per trace
    """
    options = options or FitOptions()
    log.info(f"launching {len(traces)} fit(s)")

    if max_workers is None:
        results = await asyncio.gather(*[_fit_task(t, options, None) for t in traces])
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            results = await asyncio.gather(*[_fit_task(t, options, executor) for t in traces])

    return sorted(results, key=lambda r: (r[0], r[1]))
