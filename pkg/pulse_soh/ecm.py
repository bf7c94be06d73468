# Copyright (c) 2026, The pulse-soh authors. All rights reserved.
"""Second-order equivalent-circuit response to a constant-current step."""

from typing import Union

import numpy as np

from pulse_soh.exceptions import DegenerateWindowError, DomainError
from pulse_soh.models import EcmParams, FitWindow, PulseTrace


ArrayLike = Union[float, np.ndarray]


def _check_times(t: ArrayLike) -> np.ndarray:
    t_arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t_arr)) or np.any(t_arr < 0):
        raise DomainError("time must be finite and >= 0")
    return t_arr


def model_values(theta: np.ndarray, current: ArrayLike, t: ArrayLike) -> np.ndarray:
    """
    Evaluate the pulse response for a raw parameter vector.

    Args:
        theta (np.ndarray): (r_int, r1, tau1, r2, tau2)
        current (ArrayLike): Cell current in amperes, discharge negative
        t (ArrayLike): Seconds since pulse onset

    Returns:
        np.ndarray: Voltage delta in volts, broadcast over current and t
    """
    r_int, r1, tau1, r2, tau2 = theta
    # 1 - exp(-x) == -expm1(-x), exact for small x
    return current * (r_int - r1 * np.expm1(-t / tau1) - r2 * np.expm1(-t / tau2))


def model_jacobian(theta: np.ndarray, current: ArrayLike, t: ArrayLike) -> np.ndarray:
    """
    Partial derivatives of the pulse response for a raw parameter vector.

    Args:
        theta (np.ndarray): (r_int, r1, tau1, r2, tau2)
        current (ArrayLike): Cell current in amperes
        t (ArrayLike): Seconds since pulse onset

    Returns:
        np.ndarray: Shape (..., 5), columns ordered like theta
    """
    r_int, r1, tau1, r2, tau2 = theta
    current, t = np.broadcast_arrays(
        np.asarray(current, dtype=float), np.asarray(t, dtype=float)
    )
    decay1 = np.exp(-t / tau1)
    decay2 = np.exp(-t / tau2)
    return np.stack(
        [
            current,
            -current * np.expm1(-t / tau1),
            -current * r1 * (t / tau1**2) * decay1,
            -current * np.expm1(-t / tau2),
            -current * r2 * (t / tau2**2) * decay2,
        ],
        axis=-1,
    )


def normalize(params: EcmParams) -> EcmParams:
    """Return params with the RC branches ordered so that tau1 <= tau2."""
    return params.normalized()


def pulse_response(params: EcmParams, current: ArrayLike, t: ArrayLike) -> ArrayLike:
    """
    Voltage delta of the cell t seconds into a constant-current pulse.

    Args:
        params (EcmParams): The circuit parameters
        current (ArrayLike): Cell current in amperes, discharge negative
        t (ArrayLike): Seconds since pulse onset

    Raises:
        DomainError: If t is negative or not finite, or current is not finite

    Returns:
        ArrayLike: Volts, a float for scalar inputs
    """
    t_arr = _check_times(t)
    current_arr = np.asarray(current, dtype=float)
    if not np.all(np.isfinite(current_arr)):
        raise DomainError("current must be finite")
    values = model_values(params.as_array(), current_arr, t_arr)
    return float(values) if np.ndim(values) == 0 else values


def response_series(params: EcmParams, trace: PulseTrace) -> np.ndarray:
    """Model the whole trace, one value per sample in trace order."""
    t, current, _ = trace.arrays()
    return model_values(params.as_array(), current, _check_times(t))


def jacobian(params: EcmParams, current: float, t: float) -> np.ndarray:
    """
    Derivatives of pulse_response with respect to (r_int, r1, tau1, r2, tau2).

    Args:
        params (EcmParams): The circuit parameters
        current (float): Cell current in amperes
        t (float): Seconds since pulse onset

    Raises:
        DomainError: If t is negative or not finite

    Returns:
        np.ndarray: The 5-vector of partial derivatives
    """
    t_arr = _check_times(t)
    if not np.isfinite(current):
        raise DomainError("current must be finite")
    return model_jacobian(params.as_array(), current, t_arr)


def residuals(params: EcmParams, trace: PulseTrace, window: FitWindow) -> np.ndarray:
    """
    Measured minus modeled voltage over the samples inside the window.

    Args:
        params (EcmParams): The circuit parameters
        trace (PulseTrace): The measured pulse
        window (FitWindow): Samples with t_min <= t <= t_max are kept

    Raises:
        DegenerateWindowError: If fewer than 2 samples fall in the window

    Returns:
        np.ndarray: One residual per in-window sample
    """
    mask = trace.in_window(window)
    count = int(np.count_nonzero(mask))
    if count < 2:
        raise DegenerateWindowError(
            f"window [{window.t_min}, {window.t_max}] s holds {count} sample(s), need 2"
        )
    t, current, voltage = trace.arrays()
    return voltage[mask] - model_values(params.as_array(), current[mask], t[mask])


def sse(params: EcmParams, trace: PulseTrace, window: FitWindow) -> float:
    """Sum of squared in-window residuals, in volts squared."""
    res = residuals(params, trace, window)
    return float(res @ res)
