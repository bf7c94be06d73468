# Copyright (c) 2026, The pulse-soh authors. All rights reserved.
"""From per-cycle records to training-ready feature rows."""

from collections import defaultdict
from typing import Dict, List, Literal, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger as log

from pulse_soh.config import (
    CORRELATION_COLUMNS,
    DEFAULT_SMOOTHING_WINDOW,
    FEATURE_NAMES,
    PARAM_NAMES,
)
from pulse_soh.exceptions import (
    InvalidCorrectionError,
    JoinError,
    ReferenceCapacityError,
    UnlabeledRecordError,
)
from pulse_soh.models import Correction, CycleRecord, EcmParams, FeatureRow


Reference = Union[Literal["per-battery-max"], float]

_FLAT_SPREAD = 1e-12


def join_fits(
    records: Sequence[CycleRecord], fits: Dict[Tuple[str, int], EcmParams]
) -> List[CycleRecord]:
    """
    Attach fitted parameters to cycle records.

    Cycles without a fit keep params=None; a fit without a cycle is an error.

    Args:
        records (Sequence[CycleRecord]): Records from the cycles log
        fits (Dict[Tuple[str, int], EcmParams]): Parameters keyed by (battery_id, cycle_index)

    Raises:
        JoinError: If some fitted keys have no cycle record

    Returns:
        List[CycleRecord]: The records, in input order
    """
    known = {(r.battery_id, r.cycle_index) for r in records}
    orphans = sorted(key for key in fits if key not in known)
    if orphans:
        shown = ", ".join(f"({b}, {c})" for b, c in orphans[:20])
        raise JoinError(
            f"{len(orphans)} fitted pulse(s) without a cycle record: {shown}", orphans
        )
    return [
        r.model_copy(update={"params": fits[(r.battery_id, r.cycle_index)]})
        if (r.battery_id, r.cycle_index) in fits
        else r
        for r in records
    ]


def apply_corrections(
    records: Sequence[CycleRecord], corrections: Sequence[Correction]
) -> List[CycleRecord]:
    """
    Add declared capacity offsets to the matching cycles.

    Args:
        records (Sequence[CycleRecord]): The cycle records
        corrections (Sequence[Correction]): Offsets by battery and inclusive cycle range

    Raises:
        InvalidCorrectionError: Unknown battery id, or a capacity that ends up <= 0

    Returns:
        List[CycleRecord]: Same order; untouched records are the input objects
    """
    batteries = {r.battery_id for r in records}
    for correction in corrections:
        if correction.battery_id not in batteries:
            raise InvalidCorrectionError(
                f"correction references unknown battery {correction.battery_id!r}"
            )

    corrected = []
    for record in records:
        matching = [
            c
            for c in corrections
            if c.battery_id == record.battery_id
            and c.cycle_from <= record.cycle_index <= c.cycle_to
        ]
        if not matching:
            corrected.append(record)
            continue
        capacity = record.discharged_ah
        for correction in matching:
            capacity += correction.delta_ah
        if capacity <= 0:
            raise InvalidCorrectionError(
                f"battery {record.battery_id} cycle {record.cycle_index}: "
                f"corrected capacity {capacity} Ah is not positive"
            )
        corrected.append(record.model_copy(update={"discharged_ah": capacity}))
    return corrected


def compute_soh(
    records: Sequence[CycleRecord], reference: Reference = "per-battery-max"
) -> List[CycleRecord]:
    """
    Label every record with 100 * discharged_ah / reference_ah.

    Args:
        records (Sequence[CycleRecord]): The cycle records
        reference (Reference): "per-battery-max" or a capacity in amp-hours

    Raises:
        ReferenceCapacityError: If the reference is not positive
        ValueError: If the reference is an unknown mode

    Returns:
        List[CycleRecord]: Labeled records in input order
    """
    if isinstance(reference, str):
        if reference != "per-battery-max":
            raise ValueError(f"unknown reference mode {reference!r}")
        refs: Dict[str, float] = {}
        for r in records:
            refs[r.battery_id] = max(refs.get(r.battery_id, 0.0), r.discharged_ah)
    else:
        if not np.isfinite(reference) or reference <= 0:
            raise ReferenceCapacityError(f"reference capacity must be > 0, got {reference}")
        refs = {r.battery_id: float(reference) for r in records}

    return [
        r.model_copy(update={"soh_percent": 100.0 * r.discharged_ah / refs[r.battery_id]})
        for r in records
    ]


def trim_burn_in(records: Sequence[CycleRecord]) -> List[CycleRecord]:
    """Drop, per battery, every cycle before the first maximum-capacity cycle."""
    capacities: Dict[str, List[Tuple[int, float]]] = defaultdict(list)
    for r in records:
        capacities[r.battery_id].append((r.cycle_index, r.discharged_ah))

    peak_cycle = {}
    for battery_id, series in capacities.items():
        position = int(np.argmax([ah for _, ah in series]))
        peak_cycle[battery_id] = series[position][0]

    kept = [r for r in records if r.cycle_index >= peak_cycle[r.battery_id]]
    log.debug(f"burn-in trim dropped {len(records) - len(kept)} cycle(s)")
    return kept


def sliding_mean(series: Sequence[float], window: int = DEFAULT_SMOOTHING_WINDOW) -> List[float]:
    """
    Trailing mean over the last `window` values, shorter at the start.

    Args:
        series (Sequence[float]): Values in cycle order
        window (int): Number of samples averaged

    Raises:
        ValueError: If window < 1

    Returns:
        List[float]: Same length as series
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    values = pd.Series(series, dtype=float)
    return values.rolling(window, min_periods=1).mean().tolist()


def _smoothed_frame(
    records: Sequence[CycleRecord], columns: Sequence[str], window: int
) -> pd.DataFrame:
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    for r in records:
        if r.soh_percent is None:
            raise UnlabeledRecordError(
                f"battery {r.battery_id} cycle {r.cycle_index} has no SoH label"
            )
        if r.params is None:
            raise UnlabeledRecordError(
                f"battery {r.battery_id} cycle {r.cycle_index} has no fitted parameters"
            )
    frame = pd.DataFrame(
        {
            "battery_id": [r.battery_id for r in records],
            "cycle_index": [r.cycle_index for r in records],
            **{
                name: [getattr(r.params, name) for r in records]
                for name in columns
                if name != "soh_percent"
            },
            "soh_percent": [r.soh_percent for r in records],
        }
    )
    value_columns = [c for c in frame.columns if c not in ("battery_id", "cycle_index")]
    frame[value_columns] = frame.groupby("battery_id", sort=False)[value_columns].transform(
        lambda s: s.rolling(window, min_periods=1).mean()
    )
    return frame


def build_features(
    records: Sequence[CycleRecord], window: int = DEFAULT_SMOOTHING_WINDOW
) -> List[FeatureRow]:
    """
    Smooth (r1, r2, tau1, tau2) and SoH per battery and emit one row per record.

    r_int is left out of the features on purpose: it is inconsistent from
    one battery to the next.

    Args:
        records (Sequence[CycleRecord]): Labeled and fitted records, sorted per battery
        window (int): Sliding-mean length in cycles

    Raises:
        UnlabeledRecordError: If a record has no SoH label or no parameters

    Returns:
        List[FeatureRow]: In input order
    """
    if not records:
        return []
    frame = _smoothed_frame(records, [*FEATURE_NAMES, "soh_percent"], window)
    return [
        FeatureRow(
            battery_id=row.battery_id,
            cycle_index=int(row.cycle_index),
            r1=row.r1,
            r2=row.r2,
            tau1=row.tau1,
            tau2=row.tau2,
            soh_percent=row.soh_percent,
        )
        for row in frame.itertuples(index=False)
    ]


def _pearson(x: pd.Series, y: pd.Series) -> float:
    # A flat series (up to rounding of the smoothing) has no defined correlation.
    for series in (x, y):
        values = series.to_numpy(dtype=float)
        if np.ptp(values) <= _FLAT_SPREAD * np.max(np.abs(values)):
            return float("nan")
    return float(x.corr(y))


def parameter_correlation(
    records: Sequence[CycleRecord], window: int = DEFAULT_SMOOTHING_WINDOW
) -> pd.DataFrame:
    """
    Pearson correlation between each smoothed parameter and smoothed SoH, per battery.

    Args:
        records (Sequence[CycleRecord]): Labeled and fitted records, sorted per battery
        window (int): Sliding-mean length in cycles

    Returns:
        pd.DataFrame: Columns battery_id, parameter, pearson_r, row_count
    """
    if not records:
        return pd.DataFrame(columns=CORRELATION_COLUMNS)
    frame = _smoothed_frame(records, [*PARAM_NAMES, "soh_percent"], window)
    rows = []
    for battery_id, group in frame.groupby("battery_id", sort=False):
        for name in PARAM_NAMES:
            rows.append(
                {
                    "battery_id": battery_id,
                    "parameter": name,
                    "pearson_r": _pearson(group[name], group["soh_percent"]),
                    "row_count": len(group),
                }
            )
    return pd.DataFrame(rows, columns=CORRELATION_COLUMNS)


def parameter_drift(rows: Sequence[FeatureRow]) -> pd.DataFrame:
    """
    Relative change of every feature since the first row of its battery.

    Lets cells be compared on how fast their parameters move, with no
    trained estimator.

    Args:
        rows (Sequence[FeatureRow]): Feature rows, sorted per battery

    Returns:
        pd.DataFrame: battery_id, cycle_index, one column per feature, soh_percent
    """
    frame = pd.DataFrame([r.model_dump() for r in rows])
    if frame.empty:
        return pd.DataFrame(columns=["battery_id", "cycle_index", *FEATURE_NAMES, "soh_percent"])
    first = frame.groupby("battery_id", sort=False)[FEATURE_NAMES].transform("first")
    frame[FEATURE_NAMES] = frame[FEATURE_NAMES] / first - 1.0
    return frame[["battery_id", "cycle_index", *FEATURE_NAMES, "soh_percent"]]
