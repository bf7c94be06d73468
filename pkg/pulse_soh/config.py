# Copyright (c) 2026, The pulse-soh authors. All rights reserved.
"""Configuration file for the pulse_soh package."""

import os

from dotenv import load_dotenv


load_dotenv()

AMBIENT_TEMP_CELSIUS = 21.0
BURN_IN_RANGE = (60, 80)
CURRENT_TOLERANCE = float(os.getenv("PULSE_SOH_CURRENT_TOLERANCE", "0.05"))
DEFAULT_LOWER_BOUNDS = (1e-6, 1e-6, 1e-3, 1e-6, 1e-3)
DEFAULT_SMOOTHING_WINDOW = 20
DEFAULT_T_MAX = 10.0
DEFAULT_T_MIN = 1.0
DEFAULT_UPPER_BOUNDS = (1.0, 1.0, 1e3, 1.0, 1e3)
ESTIMATOR_KINDS = ["ols", "huber", "theil_sen"]
FEATURE_NAMES = ["r1", "r2", "tau1", "tau2"]
FLOAT_FORMAT = "%.12g"
LOG_LEVEL = os.getenv("PULSE_SOH_LOG_LEVEL", "INFO")
MAX_WORKERS = (
    int(os.environ["PULSE_SOH_MAX_WORKERS"])
    if os.getenv("PULSE_SOH_MAX_WORKERS")
    else None
)
MODEL_FORMAT_VERSION = 1
NOMINAL_AH = 105.0
PARAM_NAMES = ["r_int", "r1", "tau1", "r2", "tau2"]
PULSE_CURRENT = -60.0
PULSE_DURATION = 10.0
SAMPLE_RATE = 10.0

CORRECTIONS_COLUMNS = ["battery_id", "cycle_from", "cycle_to", "delta_ah"]
CORRELATION_COLUMNS = ["battery_id", "parameter", "pearson_r", "row_count"]
CYCLES_COLUMNS = ["battery_id", "cycle_index", "discharged_ah"]
FEATURES_COLUMNS = [
    "battery_id",
    "cycle_index",
    "r1",
    "r2",
    "tau1",
    "tau2",
    "soh_percent",
]
GROUND_TRUTH_COLUMNS = [
    "battery_id",
    "cycle_index",
    "r_int",
    "r1",
    "tau1",
    "r2",
    "tau2",
    "soh_percent",
]
PARAMS_COLUMNS = [
    "battery_id",
    "cycle_index",
    "r_int",
    "r1",
    "tau1",
    "r2",
    "tau2",
    "sse",
    "converged",
    "residual_rms",
    "condition_warning",
    "residual_autocorr",
]
REPORT_COLUMNS = ["battery_id", "mae_percent", "r2", "max_abs_error_percent"]
RESIDUALS_COLUMNS = [
    "battery_id",
    "cycle_index",
    "predicted_percent",
    "actual_percent",
    "error_percent",
]
TRACE_COLUMNS = ["t_s", "current_a", "voltage_delta_v"]
TRACE_ABSOLUTE_COLUMNS = ["t_s", "current_a", "voltage_v"]
