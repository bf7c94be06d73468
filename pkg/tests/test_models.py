# Copyright (c) 2026, The pulse-soh authors. All rights reserved.
"""Tests for models.py file."""

from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from pulse_soh.models import (
    BatterySpec,
    Correction,
    DriftProfile,
    EcmParams,
    FeatureRow,
    FitOptions,
    FitWindow,
    PulseTrace,
    RunConfig,
    SohModel,
    TrainingMeta,
)


@pytest.mark.parametrize("field", ["r_int", "r1", "tau1", "r2", "tau2"])
@pytest.mark.parametrize("value", [0.0, -1e-3, float("nan"), float("inf")])
def test_ecm_params_rejects_non_positive(reference_params: EcmParams, field: str, value: float):
    """Test that every parameter must be finite and strictly positive."""
    values = reference_params.model_dump()
    values[field] = value
    with pytest.raises(ValidationError):
        EcmParams(**values)


def test_ecm_params_array_order(reference_params: EcmParams):
    """Test the (r_int, r1, tau1, r2, tau2) ordering."""
    array = reference_params.as_array()
    assert array.tolist() == [1.0e-3, 0.5e-3, 1.0, 0.8e-3, 20.0]
    assert EcmParams.from_array(array) == reference_params


def test_ecm_params_normalized():
    """Test that the branches are swapped only when tau1 > tau2."""
    swapped = EcmParams(r_int=1e-3, r1=0.8e-3, tau1=20.0, r2=0.5e-3, tau2=1.0)
    normalized = swapped.normalized()
    assert (normalized.r1, normalized.tau1) == (0.5e-3, 1.0)
    assert (normalized.r2, normalized.tau2) == (0.8e-3, 20.0)
    assert normalized.normalized() is normalized


def test_ecm_params_frozen(reference_params: EcmParams):
    """Test that parameters are immutable."""
    with pytest.raises(ValidationError):
        reference_params.r1 = 1.0


@pytest.mark.parametrize("t_min, t_max", [(5.0, 5.0), (6.0, 5.0), (-1.0, 5.0)])
def test_fit_window_invalid(t_min: float, t_max: float):
    """Test that a window needs 0 <= t_min < t_max."""
    with pytest.raises(ValidationError):
        FitWindow(t_min=t_min, t_max=t_max)


def test_fit_window_defaults():
    """Test the default window."""
    window = FitWindow()
    assert (window.t_min, window.t_max) == (1.0, 10.0)


def test_fit_options_bounds():
    """Test that lower bounds must be positive and below upper bounds."""
    with pytest.raises(ValidationError):
        FitOptions(lower_bounds=(0.0, 1e-6, 1e-3, 1e-6, 1e-3))
    with pytest.raises(ValidationError):
        FitOptions(upper_bounds=(1e-7, 1.0, 1e3, 1.0, 1e3))


@pytest.mark.parametrize(
    "t, current, voltage",
    [
        ((), (), ()),
        ((0.0, 0.1), (-60.0,), (0.0, 0.0)),
        ((0.0, 0.1, 0.1), (-60.0,) * 3, (0.0,) * 3),
        ((0.2, 0.1), (-60.0,) * 2, (0.0,) * 2),
        ((-0.1, 0.1), (-60.0,) * 2, (0.0,) * 2),
        ((0.0, 0.1), (-60.0, -70.0), (0.0, 0.0)),
        ((0.0, 0.1), (-60.0, -60.0), (0.0, float("nan"))),
    ],
)
def test_pulse_trace_invalid(t: tuple, current: tuple, voltage: tuple):
    """Test the sample invariants of a pulse trace."""
    with pytest.raises(ValidationError):
        PulseTrace(t=t, current=current, voltage_delta=voltage)


def test_pulse_trace_current_tolerance():
    """Test that small current ripple is accepted."""
    trace = PulseTrace(t=(0.0, 0.1, 0.2), current=(-60.0, -60.5, -59.6), voltage_delta=(0.0,) * 3)
    assert len(trace.t) == 3


def test_pulse_trace_from_terminal_voltage():
    """Test the conversion of an absolute voltage log."""
    trace = PulseTrace.from_terminal_voltage(
        t=[-0.2, -0.1, 0.0, 0.1],
        current=[-60.0, -60.0, -60.0, -60.0],
        voltage=[3.25, 3.375, 3.25, 3.125],
        battery_id="2",
        cycle_index=7,
    )
    assert trace.t == (0.0, 0.1)
    assert trace.voltage_delta == (-0.125, -0.25)
    assert (trace.battery_id, trace.cycle_index) == ("2", 7)


def test_pulse_trace_from_terminal_voltage_needs_reference():
    """Test that a log without pre-pulse sample is refused."""
    with pytest.raises(ValueError):
        PulseTrace.from_terminal_voltage(t=[0.0, 0.1], current=[-60.0] * 2, voltage=[3.2, 3.1])


def test_pulse_trace_restricted():
    """Test the in-window sub-trace."""
    trace = PulseTrace(
        t=(0.0, 0.5, 1.0, 1.5, 2.0),
        current=(-60.0,) * 5,
        voltage_delta=(0.0, -0.01, -0.02, -0.03, -0.04),
        battery_id="3",
        cycle_index=4,
    )
    window = FitWindow(t_min=0.5, t_max=1.5)
    assert trace.in_window(window).tolist() == [False, True, True, True, False]
    sub = trace.restricted(window)
    assert sub.t == (0.5, 1.0, 1.5)
    assert sub.voltage_delta == (-0.01, -0.02, -0.03)
    assert (sub.battery_id, sub.cycle_index) == ("3", 4)


def test_correction_range():
    """Test that corrections need cycle_from <= cycle_to."""
    Correction(battery_id="2", cycle_from=51, cycle_to=51, delta_ah=-1.0)
    with pytest.raises(ValidationError):
        Correction(battery_id="2", cycle_from=259, cycle_to=51, delta_ah=-1.0)


@pytest.mark.parametrize("soh", [0.0, -5.0, 110.5])
def test_feature_row_soh_range(soh: float):
    """Test the SoH label sanity range."""
    with pytest.raises(ValidationError):
        FeatureRow(
            battery_id="1", cycle_index=1, r1=1e-3, r2=1e-3, tau1=1.0, tau2=20.0, soh_percent=soh
        )


def test_soh_model_feature_names():
    """Test that the feature order is fixed."""
    meta = TrainingMeta(battery_ids=["3"], row_count=10, train_mae=0.1, train_r2=0.9)
    SohModel(kind="ols", coefficients=(1.0, 2.0, 3.0, 4.0), intercept=5.0, training_meta=meta)
    with pytest.raises(ValidationError):
        SohModel(
            kind="ols",
            feature_names=["r2", "r1", "tau1", "tau2"],
            coefficients=(1.0, 2.0, 3.0, 4.0),
            intercept=5.0,
            training_meta=meta,
        )


def test_battery_spec_defaults():
    """Test the defaults of a simulated battery."""
    spec = BatterySpec(battery_id="1")
    assert spec.nominal_ah == 105.0
    assert spec.pulse_current == -60.0
    assert spec.pulse_duration == 10.0
    assert spec.sample_rate == 10.0
    assert spec.ambient_temp_celsius == 21.0
    with pytest.raises(ValidationError):
        BatterySpec(battery_id="1", pulse_current=0.0)


def test_drift_profile(reference_params: EcmParams):
    """Test the drift evaluation and the positivity check."""
    profile = DriftProfile(base=reference_params, slope=(1e-5, 1e-5, 0.02, 1e-5, 0.2))
    np.testing.assert_allclose(profile.params_at(100.0), reference_params.as_array())
    np.testing.assert_allclose(profile.params_at(90.0)[2], 1.2)
    assert profile.params_at(np.array([100.0, 90.0])).shape == (2, 5)
    assert profile.positivity_violations(80.0) == []

    shrinking = DriftProfile(base=reference_params, slope=(0.0, -1e-4, 0.0, 0.0, 0.0))
    assert shrinking.positivity_violations(80.0) == ["r1"]


def test_run_config_missing_input(tmp_path: Path):
    """Test that input paths must exist."""
    with pytest.raises(ValidationError):
        RunConfig(command="fit", inputs=[tmp_path / "b1_c1.csv"], out=tmp_path / "out.csv")


def test_run_config_overlapping_ids(tmp_path: Path):
    """Test that train and test ids must be disjoint."""
    with pytest.raises(ValidationError):
        RunConfig(command="eval", train_ids=["1", "3"], test_ids=["1"], out=tmp_path / "r.csv")


def test_run_config_fit_options():
    """Test the solver options built from a run config."""
    options = RunConfig(command="fit", t_min=0.5, t_max=8.0, max_iterations=50).fit_options()
    assert options.window == FitWindow(t_min=0.5, t_max=8.0)
    assert options.max_iterations == 50
