# Copyright (c) 2026, The pulse-soh authors. All rights reserved.
"""Tests for config.py file."""

import os

from pulse_soh.config import (
    BURN_IN_RANGE,
    CURRENT_TOLERANCE,
    DEFAULT_LOWER_BOUNDS,
    DEFAULT_UPPER_BOUNDS,
    ESTIMATOR_KINDS,
    FEATURE_NAMES,
    FEATURES_COLUMNS,
    LOG_LEVEL,
    PARAM_NAMES,
    PARAMS_COLUMNS,
    TRACE_COLUMNS,
)


def test_log_level():
    """Test the LOG_LEVEL constant."""
    assert LOG_LEVEL == os.getenv("PULSE_SOH_LOG_LEVEL", "INFO")


def test_current_tolerance():
    """Test the CURRENT_TOLERANCE constant."""
    assert CURRENT_TOLERANCE == float(os.getenv("PULSE_SOH_CURRENT_TOLERANCE", "0.05"))
    assert CURRENT_TOLERANCE > 0


def test_feature_names():
    """Test the FEATURE_NAMES constant, r_int is not a feature."""
    assert FEATURE_NAMES == ["r1", "r2", "tau1", "tau2"]
    assert "r_int" not in FEATURE_NAMES
    assert set(FEATURE_NAMES) < set(PARAM_NAMES)


def test_bounds():
    """Test the default solver bounds."""
    assert len(DEFAULT_LOWER_BOUNDS) == len(DEFAULT_UPPER_BOUNDS) == len(PARAM_NAMES)
    for lower, upper in zip(DEFAULT_LOWER_BOUNDS, DEFAULT_UPPER_BOUNDS, strict=True):
        assert 0 < lower < upper


def test_burn_in_range():
    """Test the BURN_IN_RANGE constant."""
    assert BURN_IN_RANGE == (60, 80)


def test_estimator_kinds():
    """Test the ESTIMATOR_KINDS constant."""
    assert ESTIMATOR_KINDS == ["ols", "huber", "theil_sen"]


def test_csv_headers():
    """Test the CSV headers of the file formats."""
    assert TRACE_COLUMNS == ["t_s", "current_a", "voltage_delta_v"]
    assert FEATURES_COLUMNS == ["battery_id", "cycle_index", *FEATURE_NAMES, "soh_percent"]
    assert PARAMS_COLUMNS[:7] == ["battery_id", "cycle_index", *PARAM_NAMES]
    assert PARAMS_COLUMNS[7:10] == ["sse", "converged", "residual_rms"]
