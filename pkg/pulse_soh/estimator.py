# Copyright (c) 2026, The pulse-soh authors. All rights reserved.
"""SoH regressors over the filtered pulse features, and their metrics."""

import itertools
import math
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger as log

from pulse_soh.config import FEATURE_NAMES
from pulse_soh.exceptions import (
    BatterySelectionError,
    CollinearityError,
    DomainError,
    InsufficientDataError,
    MetricError,
)
from pulse_soh.models import (
    BatteryScore,
    EvalReport,
    FeatureRow,
    ResidualPoint,
    SohModel,
    TrainingMeta,
)


_RANK_TOLERANCE = 1e-10
_MAD_TO_SIGMA = 0.6745
_EXACT_SCALE = 1e-12
_SUBSET_SIZE = len(FEATURE_NAMES) + 1


def _design(rows: Sequence[FeatureRow]) -> Tuple[np.ndarray, np.ndarray]:
    features = np.array([r.features() for r in rows], dtype=float).reshape(-1, 4)
    labels = np.array([r.soh_percent for r in rows], dtype=float)
    return features, labels


def _check_rank(features: np.ndarray) -> None:
    # Unit-norm columns so the rank test does not depend on feature units.
    design = np.column_stack([np.ones(len(features)), features])
    norms = np.linalg.norm(design, axis=0)
    norms[norms == 0] = 1.0
    _, singular, vt = np.linalg.svd(design / norms, full_matrices=False)
    if singular[-1] > _RANK_TOLERANCE * singular[0]:
        return
    null = np.abs(vt[-1])
    names = ["intercept", *FEATURE_NAMES]
    columns = [n for n, weight in zip(names, null, strict=True) if weight > 0.1 * null.max()]
    raise CollinearityError(
        f"design matrix is rank deficient, collinear columns: {', '.join(columns)}",
        columns,
    )


def _least_squares(
    features: np.ndarray, labels: np.ndarray, weights: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, float]:
    norms = np.linalg.norm(features, axis=0)
    design = np.column_stack([np.ones(len(features)), features / norms])
    target = labels
    if weights is not None:
        root = np.sqrt(weights)
        design = design * root[:, np.newaxis]
        target = labels * root
    beta, *_ = np.linalg.lstsq(design, target, rcond=None)
    return beta[1:] / norms, float(beta[0])


def _standardize(features: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    center = features.mean(axis=0)
    spread = features.std(axis=0)
    return (features - center) / spread, center, spread


def _unstandardize(
    beta: np.ndarray, center: np.ndarray, spread: np.ndarray
) -> Tuple[np.ndarray, float]:
    coefficients = beta[1:] / spread
    return coefficients, float(beta[0] - coefficients @ center)


def _build_model(
    kind: str,
    rows: Sequence[FeatureRow],
    coefficients: np.ndarray,
    intercept: float,
) -> SohModel:
    features, labels = _design(rows)
    predicted = features @ coefficients + intercept
    return SohModel(
        kind=kind,
        coefficients=tuple(float(c) for c in coefficients),
        intercept=intercept,
        training_meta=TrainingMeta(
            battery_ids=sorted({r.battery_id for r in rows}),
            row_count=len(rows),
            train_mae=mae(predicted, labels),
            train_r2=_defined_r2(predicted, labels),
        ),
    )


def _checked_design(rows: Sequence[FeatureRow], minimum: int) -> Tuple[np.ndarray, np.ndarray]:
    if len(rows) < minimum:
        raise InsufficientDataError(f"need at least {minimum} rows, got {len(rows)}")
    features, labels = _design(rows)
    _check_rank(features)
    return features, labels


def train_ols(rows: Sequence[FeatureRow]) -> SohModel:
    """
    Ordinary least squares of SoH on (r1, r2, tau1, tau2) with an intercept.

    Args:
        rows (Sequence[FeatureRow]): Training rows, at least 5

    Raises:
        InsufficientDataError: Fewer than 5 rows
        CollinearityError: If the design matrix is rank deficient

    Returns:
        SohModel: The fitted model
    """
    features, labels = _checked_design(rows, 5)
    coefficients, intercept = _least_squares(features, labels)
    return _build_model("ols", rows, coefficients, intercept)


def train_huber(
    rows: Sequence[FeatureRow],
    transition: float = 1.345,
    max_iterations: int = 100,
    tolerance: float = 1e-8,
) -> SohModel:
    """
    Huber regression by iteratively reweighted least squares.

    The transition is `transition` times the MAD scale of the current
    residuals, re-estimated at every iteration.

    Args:
        rows (Sequence[FeatureRow]): Training rows, at least 5
        transition (float): Transition point in units of the robust scale
        max_iterations (int): Reweighting rounds
        tolerance (float): Relative coefficient change that stops the loop

    Raises:
        InsufficientDataError: Fewer than 5 rows
        CollinearityError: If the design matrix is rank deficient

    Returns:
        SohModel: The fitted model
    """
    features, labels = _checked_design(rows, 5)
    scaled, center, spread = _standardize(features)
    design = np.column_stack([np.ones(len(scaled)), scaled])
    beta, *_ = np.linalg.lstsq(design, labels, rcond=None)
    floor = _EXACT_SCALE * max(1.0, float(np.max(np.abs(labels))))

    for iteration in range(max_iterations):
        residual = labels - design @ beta
        scale = float(np.median(np.abs(residual - np.median(residual)))) / _MAD_TO_SIGMA
        if scale <= floor:
            break
        cutoff = transition * scale
        magnitude = np.abs(residual)
        weights = np.where(magnitude <= cutoff, 1.0, cutoff / np.maximum(magnitude, cutoff))
        root = np.sqrt(weights)
        updated, *_ = np.linalg.lstsq(design * root[:, np.newaxis], labels * root, rcond=None)
        change = np.linalg.norm(updated - beta) / max(np.linalg.norm(beta), floor)
        beta = updated
        if change < tolerance:
            break
    log.debug(f"huber stopped after {iteration + 1} reweighting round(s)")

    coefficients, intercept = _unstandardize(beta, center, spread)
    return _build_model("huber", rows, coefficients, intercept)


def _subsets(n: int, max_subsets: int, seed: int) -> np.ndarray:
    if math.comb(n, _SUBSET_SIZE) <= max_subsets:
        return np.array(list(itertools.combinations(range(n), _SUBSET_SIZE)))
    rng = np.random.default_rng(seed)
    return np.array(
        [rng.choice(n, size=_SUBSET_SIZE, replace=False) for _ in range(max_subsets)]
    )


def train_theil_sen(
    rows: Sequence[FeatureRow], max_subsets: int = 10000, seed: int = 0
) -> SohModel:
    """
    Multivariate Theil-Sen: component-wise median of exact fits on 5-row subsets.

    All subsets are used when there are at most `max_subsets` of them,
    otherwise `max_subsets` are drawn with the given seed.

    Args:
        rows (Sequence[FeatureRow]): Training rows, at least 6
        max_subsets (int): Cap on the number of subsets solved
        seed (int): Seed of the subset sampling

    Raises:
        InsufficientDataError: Fewer than 6 rows
        CollinearityError: If the design, or every subset, is rank deficient

    Returns:
        SohModel: The fitted model
    """
    features, labels = _checked_design(rows, 6)
    scaled, center, spread = _standardize(features)
    design = np.column_stack([np.ones(len(scaled)), scaled])

    subsets = _subsets(len(rows), max_subsets, seed)
    systems = design[subsets]
    targets = labels[subsets]
    solvable = np.abs(np.linalg.det(systems)) > _RANK_TOLERANCE
    if not np.any(solvable):
        raise CollinearityError("every row subset is singular", ["intercept", *FEATURE_NAMES])
    solutions = np.linalg.solve(systems[solvable], targets[solvable][..., np.newaxis])[..., 0]
    beta = np.median(solutions, axis=0)

    coefficients, intercept = _unstandardize(beta, center, spread)
    return _build_model("theil_sen", rows, coefficients, intercept)


ESTIMATORS: Dict[str, Callable[..., SohModel]] = {
    "ols": train_ols,
    "huber": train_huber,
    "theil_sen": train_theil_sen,
}


def train(rows: Sequence[FeatureRow], kind: str = "ols", **options) -> SohModel:
    """
    Train the estimator registered under `kind`.

    Args:
        rows (Sequence[FeatureRow]): Training rows
        kind (str): One of the ESTIMATORS keys
        **options: Keyword arguments of the chosen trainer

    Raises:
        ValueError: If kind is unknown

    Returns:
        SohModel: The fitted model
    """
    if kind not in ESTIMATORS:
        raise ValueError(f"unknown estimator {kind!r}, choose from {sorted(ESTIMATORS)}")
    return ESTIMATORS[kind](rows, **options)


def predict(model: SohModel, row: FeatureRow) -> float:
    """Affine prediction w . (r1, r2, tau1, tau2) + b, never clipped."""
    features = np.asarray(row.features(), dtype=float)
    if not np.all(np.isfinite(features)):
        raise DomainError("features must be finite")
    return float(np.dot(model.coefficients, features) + model.intercept)


def _paired(predicted: Sequence[float], actual: Sequence[float], minimum: int) -> np.ndarray:
    p = np.asarray(predicted, dtype=float)
    a = np.asarray(actual, dtype=float)
    if p.shape != a.shape or p.ndim != 1:
        raise MetricError(f"length mismatch: {p.shape} vs {a.shape}")
    if p.size < minimum:
        raise MetricError(f"need at least {minimum} values, got {p.size}")
    return np.stack([p, a])


def mae(predicted: Sequence[float], actual: Sequence[float]) -> float:
    """Mean absolute error, in the unit of the inputs."""
    p, a = _paired(predicted, actual, 1)
    return float(np.mean(np.abs(p - a)))


def r2(predicted: Sequence[float], actual: Sequence[float]) -> float:
    """
    Coefficient of determination 1 - SS_res / SS_tot; may be negative.

    Args:
        predicted (Sequence[float]): Model outputs
        actual (Sequence[float]): Reference values

    Raises:
        MetricError: Length mismatch, fewer than 2 values, or constant actual values

    Returns:
        float: R squared
    """
    p, a = _paired(predicted, actual, 2)
    ss_tot = float(np.sum((a - np.mean(a)) ** 2))
    if ss_tot == 0.0:
        raise MetricError("actual values have zero variance, R2 is undefined")
    return 1.0 - float(np.sum((a - p) ** 2)) / ss_tot


def _defined_r2(predicted: Sequence[float], actual: Sequence[float]) -> Optional[float]:
    try:
        return r2(predicted, actual)
    except MetricError:
        return None


def evaluate(model: SohModel, rows: Sequence[FeatureRow]) -> EvalReport:
    """
    Score a model on rows, overall and per battery.

    Args:
        model (SohModel): The trained model
        rows (Sequence[FeatureRow]): Labeled rows

    Returns:
        EvalReport: Metrics and per-cycle residuals, r2 None where it is undefined
    """
    predicted = [predict(model, r) for r in rows]
    actual = [r.soh_percent for r in rows]
    residuals = [
        ResidualPoint(
            battery_id=r.battery_id,
            cycle_index=r.cycle_index,
            predicted_percent=p,
            actual_percent=r.soh_percent,
            error_percent=p - r.soh_percent,
        )
        for r, p in zip(rows, predicted, strict=True)
    ]
    per_battery = {}
    for battery_id in dict.fromkeys(r.battery_id for r in rows):
        points = [x for x in residuals if x.battery_id == battery_id]
        p = [x.predicted_percent for x in points]
        a = [x.actual_percent for x in points]
        per_battery[battery_id] = BatteryScore(
            mae_percent=mae(p, a),
            r2=_defined_r2(p, a),
            max_abs_error_percent=max(abs(x.error_percent) for x in points),
        )
    return EvalReport(
        mae_percent=mae(predicted, actual),
        r2=_defined_r2(predicted, actual),
        per_battery=per_battery,
        residuals=residuals,
    )


def _select(rows: Sequence[FeatureRow], ids: Iterable[str]) -> List[FeatureRow]:
    wanted = set(ids)
    return [r for r in rows if r.battery_id in wanted]


def cross_battery_eval(
    rows: Sequence[FeatureRow],
    train_ids: Iterable[str],
    test_ids: Iterable[str],
    kind: str = "ols",
    **options,
) -> Tuple[SohModel, Dict[str, EvalReport]]:
    """
    Train on some batteries and evaluate on each of the others.

    Args:
        rows (Sequence[FeatureRow]): Rows of every battery
        train_ids (Iterable[str]): Batteries used for training
        test_ids (Iterable[str]): Batteries evaluated one by one
        kind (str): Estimator kind
        **options: Keyword arguments of the chosen trainer

    Raises:
        BatterySelectionError: Empty, overlapping or missing battery ids

    Returns:
        Tuple[SohModel, Dict[str, EvalReport]]: The model and one report per test battery
    """
    train_set, test_set = set(train_ids), set(test_ids)
    if not train_set or not test_set:
        raise BatterySelectionError("train and test battery sets must be nonempty")
    if train_set & test_set:
        raise BatterySelectionError(
            f"train and test batteries overlap: {sorted(train_set & test_set)}"
        )
    present = {r.battery_id for r in rows}
    missing = sorted((train_set | test_set) - present)
    if missing:
        raise BatterySelectionError(f"no rows for batteries {missing}")

    model = train(_select(rows, train_set), kind, **options)
    return model, evaluate_batteries(model, rows, test_set)


def evaluate_batteries(
    model: SohModel, rows: Sequence[FeatureRow], battery_ids: Iterable[str]
) -> Dict[str, EvalReport]:
    """
    Evaluate a model on each battery separately and log a summary line per battery.

    Args:
        model (SohModel): The trained model
        rows (Sequence[FeatureRow]): Rows of every battery
        battery_ids (Iterable[str]): Batteries to evaluate

    Raises:
        BatterySelectionError: If a battery has no rows

    Returns:
        Dict[str, EvalReport]: One report per battery, in sorted id order
    """
    reports = {}
    for battery_id in sorted(set(battery_ids)):
        selected = _select(rows, [battery_id])
        if not selected:
            raise BatterySelectionError(f"no rows for battery {battery_id!r}")
        report = evaluate(model, selected)
        score = report.per_battery[battery_id]
        shown_r2 = "undefined" if score.r2 is None else f"{score.r2:.3f}"
        log.info(
            f"battery {battery_id}: MAE {score.mae_percent:.3f} %, R2 {shown_r2}, "
            f"max |error| {score.max_abs_error_percent:.3f} %"
        )
        reports[battery_id] = report
    return reports
