# Copyright (c) 2026, The pulse-soh authors. All rights reserved.
"""Domain models for the pulse_soh package."""

import math
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from pulse_soh.config import (
    AMBIENT_TEMP_CELSIUS,
    CURRENT_TOLERANCE,
    DEFAULT_LOWER_BOUNDS,
    DEFAULT_SMOOTHING_WINDOW,
    DEFAULT_T_MAX,
    DEFAULT_T_MIN,
    DEFAULT_UPPER_BOUNDS,
    FEATURE_NAMES,
    MODEL_FORMAT_VERSION,
    NOMINAL_AH,
    PARAM_NAMES,
    PULSE_CURRENT,
    PULSE_DURATION,
    SAMPLE_RATE,
)


Vector5 = Tuple[float, float, float, float, float]


def _all_finite(values: Sequence[float]) -> bool:
    return all(math.isfinite(v) for v in values)


class EcmParams(BaseModel):
    """Series resistance plus two RC branches, in ohms and seconds."""

    model_config = ConfigDict(frozen=True)

    r_int: float
    r1: float
    tau1: float
    r2: float
    tau2: float

    @field_validator("r_int", "r1", "tau1", "r2", "tau2")
    @classmethod
    def _finite_positive(cls, value: float) -> float:
        if not math.isfinite(value) or value <= 0:
            raise ValueError(f"must be finite and strictly positive, got {value}")
        return value

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "EcmParams":
        """Build from the (r_int, r1, tau1, r2, tau2) ordering."""
        return cls(**{name: float(v) for name, v in zip(PARAM_NAMES, values, strict=True)})

    def as_array(self) -> np.ndarray:
        """Return the values in (r_int, r1, tau1, r2, tau2) order."""
        return np.array([self.r_int, self.r1, self.tau1, self.r2, self.tau2])

    def normalized(self) -> "EcmParams":
        """Swap the RC branches if needed so that tau1 <= tau2."""
        if self.tau1 <= self.tau2:
            return self
        return EcmParams(
            r_int=self.r_int, r1=self.r2, tau1=self.tau2, r2=self.r1, tau2=self.tau1
        )


class FitWindow(BaseModel):
    """Closed time interval, in seconds since pulse onset."""

    model_config = ConfigDict(frozen=True)

    t_min: float = DEFAULT_T_MIN
    t_max: float = DEFAULT_T_MAX

    @model_validator(mode="after")
    def _ordered(self) -> "FitWindow":
        if not (0 <= self.t_min < self.t_max) or not math.isfinite(self.t_max):
            raise ValueError(f"need 0 <= t_min < t_max, got [{self.t_min}, {self.t_max}]")
        return self


class PulseTrace(BaseModel):
    """Samples of one constant-current pulse, voltage relative to the pre-pulse value."""

    model_config = ConfigDict(frozen=True)

    t: Tuple[float, ...]
    current: Tuple[float, ...]
    voltage_delta: Tuple[float, ...]
    battery_id: str = "0"
    cycle_index: int = 0
    ambient_temp_celsius: float = AMBIENT_TEMP_CELSIUS

    @model_validator(mode="after")
    def _check_samples(self) -> "PulseTrace":
        n = len(self.t)
        if n == 0:
            raise ValueError("a pulse trace needs at least one sample")
        if len(self.current) != n or len(self.voltage_delta) != n:
            raise ValueError("t, current and voltage_delta must have the same length")
        if not (
            _all_finite(self.t)
            and _all_finite(self.current)
            and _all_finite(self.voltage_delta)
        ):
            raise ValueError("samples must be finite")
        if self.t[0] < 0:
            raise ValueError(f"t[0] must be >= 0, got {self.t[0]}")
        if any(b <= a for a, b in zip(self.t, self.t[1:])):
            raise ValueError("t must be strictly increasing")

        current = np.asarray(self.current)
        level = float(np.median(current))
        spread = float(np.max(np.abs(current - level)))
        if spread > CURRENT_TOLERANCE * abs(level):
            raise ValueError(
                f"current is not constant: spread {spread:.6g} A around {level:.6g} A"
            )
        return self

    @classmethod
    def from_terminal_voltage(
        cls,
        t: Sequence[float],
        current: Sequence[float],
        voltage: Sequence[float],
        **meta: Union[str, int, float],
    ) -> "PulseTrace":
        """
        Build a trace from an absolute terminal-voltage log.

        Samples with t < 0 are pre-pulse; the last of them is the reference
        subtracted from every sample with t >= 0.

        Args:
            t (Sequence[float]): Sample times, pulse onset at 0
            current (Sequence[float]): Cell current, discharge negative
            voltage (Sequence[float]): Absolute terminal voltage
            **meta: battery_id, cycle_index, ambient_temp_celsius

        Raises:
            ValueError: If there is no pre-pulse sample

        Returns:
            PulseTrace: The voltage-delta trace
        """
        t_arr = np.asarray(t, dtype=float)
        pre = np.flatnonzero(t_arr < 0)
        if pre.size == 0:
            raise ValueError("no pre-pulse sample (t < 0) to take the reference from")
        reference = float(np.asarray(voltage, dtype=float)[pre[-1]])
        keep = t_arr >= 0
        return cls(
            t=tuple(t_arr[keep].tolist()),
            current=tuple(np.asarray(current, dtype=float)[keep].tolist()),
            voltage_delta=tuple(
                (np.asarray(voltage, dtype=float)[keep] - reference).tolist()
            ),
            **meta,
        )

    def arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (t, current, voltage_delta) as float arrays."""
        return (
            np.asarray(self.t, dtype=float),
            np.asarray(self.current, dtype=float),
            np.asarray(self.voltage_delta, dtype=float),
        )

    def in_window(self, window: FitWindow) -> np.ndarray:
        """Boolean mask of the samples with t_min <= t <= t_max."""
        t = np.asarray(self.t, dtype=float)
        return (t >= window.t_min) & (t <= window.t_max)

    def restricted(self, window: FitWindow) -> "PulseTrace":
        """Return the sub-trace made of the in-window samples only."""
        mask = self.in_window(window)
        t, current, voltage = self.arrays()
        return PulseTrace(
            t=tuple(t[mask].tolist()),
            current=tuple(current[mask].tolist()),
            voltage_delta=tuple(voltage[mask].tolist()),
            battery_id=self.battery_id,
            cycle_index=self.cycle_index,
            ambient_temp_celsius=self.ambient_temp_celsius,
        )


class FitOptions(BaseModel):
    """Solver settings for pulse identification."""

    model_config = ConfigDict(frozen=True)

    window: FitWindow = Field(default_factory=FitWindow)
    max_iterations: int = Field(default=200, gt=0)
    cost_tolerance: float = Field(default=1e-10, gt=0)
    param_tolerance: float = Field(default=1e-8, gt=0)
    initial_damping: float = Field(default=1e-3, gt=0)
    lower_bounds: Vector5 = DEFAULT_LOWER_BOUNDS
    upper_bounds: Vector5 = DEFAULT_UPPER_BOUNDS

    @model_validator(mode="after")
    def _check_bounds(self) -> "FitOptions":
        for name, lo, hi in zip(
            PARAM_NAMES, self.lower_bounds, self.upper_bounds, strict=True
        ):
            if not (0 < lo < hi) or not math.isfinite(hi):
                raise ValueError(f"bounds for {name} must satisfy 0 < lower < upper")
        return self


class FitReport(BaseModel):
    """Outcome of one pulse identification."""

    model_config = ConfigDict(frozen=True)

    params: EcmParams
    sse: float = Field(ge=0)
    iterations: int = Field(ge=0)
    converged: bool
    residual_rms: float = Field(ge=0)
    condition_warning: bool = False
    residual_autocorr: float = 0.0
    sse_history: Tuple[float, ...] = ()


class CycleRecord(BaseModel):
    """One charge/discharge cycle of one battery."""

    model_config = ConfigDict(frozen=True)

    battery_id: str
    cycle_index: int
    discharged_ah: float = Field(gt=0)
    params: Optional[EcmParams] = None
    soh_percent: Optional[float] = None


class Correction(BaseModel):
    """Additive capacity correction over an inclusive cycle range."""

    model_config = ConfigDict(frozen=True)

    battery_id: str
    cycle_from: int
    cycle_to: int
    delta_ah: float

    @model_validator(mode="after")
    def _ordered(self) -> "Correction":
        if self.cycle_from > self.cycle_to:
            raise ValueError(
                f"cycle_from ({self.cycle_from}) must be <= cycle_to ({self.cycle_to})"
            )
        if not math.isfinite(self.delta_ah):
            raise ValueError("delta_ah must be finite")
        return self


class FeatureRow(BaseModel):
    """Filtered dynamic parameters of one cycle with its SoH label."""

    model_config = ConfigDict(frozen=True)

    battery_id: str
    cycle_index: int
    r1: float
    r2: float
    tau1: float
    tau2: float
    soh_percent: float

    @field_validator("r1", "r2", "tau1", "tau2")
    @classmethod
    def _finite_positive(cls, value: float) -> float:
        if not math.isfinite(value) or value <= 0:
            raise ValueError(f"features must be finite and positive, got {value}")
        return value

    @field_validator("soh_percent")
    @classmethod
    def _sane_soh(cls, value: float) -> float:
        if not (0 < value <= 110):
            raise ValueError(f"soh_percent outside (0, 110]: {value}")
        return value

    def features(self) -> Tuple[float, float, float, float]:
        """Return (r1, r2, tau1, tau2)."""
        return (self.r1, self.r2, self.tau1, self.tau2)


class TrainingMeta(BaseModel):
    """What a model was trained on and how well it fits its own data."""

    model_config = ConfigDict(frozen=True)

    battery_ids: List[str]
    row_count: int
    train_mae: float
    train_r2: Optional[float] = None


class SohModel(BaseModel):
    """Affine SoH regressor over (r1, r2, tau1, tau2)."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["ols", "huber", "theil_sen"]
    feature_names: List[str] = Field(default_factory=lambda: list(FEATURE_NAMES))
    coefficients: Tuple[float, float, float, float]
    intercept: float
    training_meta: TrainingMeta
    format_version: int = MODEL_FORMAT_VERSION

    @model_validator(mode="after")
    def _check(self) -> "SohModel":
        if self.feature_names != FEATURE_NAMES:
            raise ValueError(f"feature_names must be {FEATURE_NAMES}")
        if not _all_finite(self.coefficients) or not math.isfinite(self.intercept):
            raise ValueError("coefficients and intercept must be finite")
        if self.format_version != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported format_version {self.format_version}")
        return self


class BatteryScore(BaseModel):
    """Per-battery evaluation figures."""

    model_config = ConfigDict(frozen=True)

    mae_percent: float
    r2: Optional[float] = None  # undefined for fewer than 2 rows or a constant SoH
    max_abs_error_percent: float


class ResidualPoint(BaseModel):
    """Prediction error on one cycle (predicted minus actual)."""

    model_config = ConfigDict(frozen=True)

    battery_id: str
    cycle_index: int
    predicted_percent: float
    actual_percent: float
    error_percent: float


class EvalReport(BaseModel):
    """Evaluation of a SoH model on a set of rows."""

    model_config = ConfigDict(frozen=True)

    mae_percent: float = Field(ge=0)
    r2: Optional[float] = Field(default=None, le=1)
    per_battery: Dict[str, BatteryScore]
    residuals: List[ResidualPoint]


class BatterySpec(BaseModel):
    """One virtual battery of a simulated aging campaign."""

    model_config = ConfigDict(frozen=True)

    battery_id: str
    nominal_ah: float = Field(default=NOMINAL_AH, gt=0)
    pulse_current: float = PULSE_CURRENT
    pulse_duration: float = Field(default=PULSE_DURATION, gt=0)
    sample_rate: float = Field(default=SAMPLE_RATE, gt=0)
    burn_in_cycles: int = Field(default=70, ge=0)
    n_cycles: int = Field(default=400, ge=0)
    ambient_temp_celsius: float = AMBIENT_TEMP_CELSIUS
    final_soh: Optional[float] = Field(default=None, gt=0, lt=100)

    @field_validator("pulse_current")
    @classmethod
    def _nonzero(cls, value: float) -> float:
        if value == 0 or not math.isfinite(value):
            raise ValueError("pulse_current must be finite and nonzero")
        return value


class DriftProfile(BaseModel):
    """
    Parameter drift with SoH, capacity fade shape and noise levels.

    Every parameter follows base + slope * (100 - soh) + curvature * (100 - soh)**2.
    The defaults are toolkit constants, not measured data.
    """

    model_config = ConfigDict(frozen=True)

    base: EcmParams
    slope: Vector5
    curvature: Vector5 = (0.0, 0.0, 0.0, 0.0, 0.0)
    final_soh: float = Field(default=85.0, gt=0, lt=100)
    fade_shape: Literal["linear", "exponential"] = "linear"
    fade_time_fraction: float = Field(default=0.5, gt=0)
    burn_in_depth: float = Field(default=3.0, ge=0, lt=100)
    voltage_sigma: float = Field(default=1e-4, ge=0)
    capacity_sigma: float = Field(default=0.05, ge=0)
    param_jitter: float = Field(default=0.02, ge=0)

    def params_at(self, soh: Union[float, np.ndarray]) -> np.ndarray:
        """
        Evaluate the drift at one or more SoH values.

        Args:
            soh (Union[float, np.ndarray]): SoH in percent

        Returns:
            np.ndarray: Shape (..., 5) in (r_int, r1, tau1, r2, tau2) order
        """
        lost = 100.0 - np.asarray(soh, dtype=float)[..., np.newaxis]
        return (
            self.base.as_array()
            + np.asarray(self.slope) * lost
            + np.asarray(self.curvature) * lost**2
        )

    def positivity_violations(self, soh_low: float, soh_high: float = 100.0) -> List[str]:
        """Return the names of parameters that reach <= 0 over [soh_low, soh_high]."""
        grid = np.linspace(soh_low, soh_high, 401)
        values = self.params_at(grid)
        return [
            name
            for name, column in zip(PARAM_NAMES, values.T, strict=True)
            if not np.all(np.isfinite(column) & (column > 0))
        ]


class RunConfig(BaseModel):
    """Validated options of one command-line run."""

    command: Literal["fit", "pipeline", "train", "eval", "simulate"]
    inputs: List[Path] = Field(default_factory=list)
    params_path: Optional[Path] = None
    cycles_path: Optional[Path] = None
    corrections_path: Optional[Path] = None
    features_path: Optional[Path] = None
    model_path: Optional[Path] = None
    spec_path: Optional[Path] = None
    profile_path: Optional[Path] = None
    out: Optional[Path] = None
    out_dir: Optional[Path] = None
    extra_out: Dict[str, Path] = Field(default_factory=dict)
    t_min: float = DEFAULT_T_MIN
    t_max: float = DEFAULT_T_MAX
    max_iterations: int = 200
    window: int = Field(default=DEFAULT_SMOOTHING_WINDOW, ge=1)
    reference: Union[Literal["per-battery-max"], float] = "per-battery-max"
    kind: Literal["ols", "huber", "theil_sen"] = "ols"
    train_ids: List[str] = Field(default_factory=list)
    test_ids: List[str] = Field(default_factory=list)
    seed: int = 0
    max_subsets: int = Field(default=10000, gt=0)
    workers: Optional[int] = None

    @model_validator(mode="after")
    def _check(self) -> "RunConfig":
        readable = [
            *self.inputs,
            self.params_path,
            self.cycles_path,
            self.corrections_path,
            self.features_path,
            self.spec_path,
            self.profile_path,
        ]
        if self.command == "eval":
            readable.append(self.model_path)
        missing = [str(p) for p in readable if p is not None and not p.exists()]
        if missing:
            raise ValueError(f"input paths do not exist: {', '.join(missing)}")

        overlap = set(self.train_ids) & set(self.test_ids)
        if overlap:
            raise ValueError(f"train and test ids overlap: {sorted(overlap)}")
        if isinstance(self.reference, float) and self.reference <= 0:
            raise ValueError("reference capacity must be positive")
        return self

    def fit_options(self) -> FitOptions:
        """Build the solver options of a fit run."""
        return FitOptions(
            window=FitWindow(t_min=self.t_min, t_max=self.t_max),
            max_iterations=self.max_iterations,
        )
