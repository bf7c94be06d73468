# Copyright (c) 2026, The pulse-soh authors. All rights reserved.
"""Identification of circuit parameters from a measured pulse."""

from itertools import combinations
from typing import Optional, Sequence, Tuple

import numpy as np
from loguru import logger as log

from pulse_soh.config import DEFAULT_LOWER_BOUNDS, DEFAULT_UPPER_BOUNDS
from pulse_soh.ecm import model_jacobian, model_values
from pulse_soh.exceptions import FitDivergenceError, InsufficientDataError
from pulse_soh.models import EcmParams, FitOptions, FitReport, FitWindow, PulseTrace


MIN_FIT_SAMPLES = 6
EARLY_SAMPLE_LIMIT = 0.2  # seconds
LATE_SAMPLE_FRACTION = 0.8
_MAX_DAMPING = 1e16
_MIN_DAMPING = 1e-15
_EXACT_FIT = 1e-26  # cost relative to sum(v**2) treated as an exact fit
_CONDITION_LIMIT = 1e-8
_TAU_MERGE = 1e-6
_MAX_LOG_STEP = 1.0
_GRID_POINTS = 16
_RESISTANCES = [0, 1, 3]


def _nominal_current(current: np.ndarray) -> float:
    level = float(np.median(current))
    if level == 0.0:
        raise InsufficientDataError("pulse current is zero, resistances are undefined")
    return level


def initial_guess(
    trace: PulseTrace,
    window: FitWindow,
    lower_bounds: Sequence[float] = DEFAULT_LOWER_BOUNDS,
    upper_bounds: Sequence[float] = DEFAULT_UPPER_BOUNDS,
) -> EcmParams:
    """
    Deterministic starting point for the solver.

    r_int comes from the earliest sample of the trace, the total resistance
    from the last in-window sample; the rest is split 40/60 between the two
    branches. Time constants start at 0.1 and 0.5 of the window end.

    Args:
        trace (PulseTrace): The measured pulse, from its onset
        window (FitWindow): The fit window
        lower_bounds (Sequence[float]): Lower clip per parameter
        upper_bounds (Sequence[float]): Upper clip per parameter

    Raises:
        InsufficientDataError: Fewer than 6 samples, no sample before 0.2 s or after
            0.8 * t_max, nothing in the window, or zero current

    Returns:
        EcmParams: The clipped guess
    """
    t, current, voltage = trace.arrays()
    if t.size < MIN_FIT_SAMPLES:
        raise InsufficientDataError(
            f"initial guess needs {MIN_FIT_SAMPLES} samples, got {t.size}"
        )
    if t[0] >= EARLY_SAMPLE_LIMIT:
        raise InsufficientDataError(
            f"first sample at {t[0]} s, the voltage step needs one before {EARLY_SAMPLE_LIMIT} s"
        )
    if t[-1] <= LATE_SAMPLE_FRACTION * window.t_max:
        raise InsufficientDataError(
            f"last sample at {t[-1]} s, need one after {LATE_SAMPLE_FRACTION * window.t_max} s"
        )
    level = _nominal_current(current)
    mask = trace.in_window(window)
    if not mask.any():
        raise InsufficientDataError("no sample inside the fit window")

    r_int = voltage[0] / level
    total = voltage[mask][-1] / level
    remaining = total - r_int
    if remaining <= 0:
        remaining = 0.1 * abs(r_int)

    guess = np.array(
        [
            r_int,
            0.4 * remaining,
            0.1 * window.t_max,
            0.6 * remaining,
            0.5 * window.t_max,
        ]
    )
    return EcmParams.from_array(np.clip(guess, lower_bounds, upper_bounds))


def _cost(
    theta: np.ndarray, t: np.ndarray, current: np.ndarray, voltage: np.ndarray
) -> Tuple[np.ndarray, float]:
    res = voltage - model_values(theta, current, t)
    return res, float(res @ res)


def _solve_resistances(
    tau1: float, tau2: float, t: np.ndarray, current: np.ndarray, voltage: np.ndarray
) -> np.ndarray:
    # With both time constants fixed the response is linear in the resistances.
    theta = np.array([1.0, 1.0, tau1, 1.0, tau2])
    basis = model_jacobian(theta, current, t)[:, _RESISTANCES]
    resistances, *_ = np.linalg.lstsq(basis, voltage, rcond=None)
    theta[_RESISTANCES] = resistances
    return theta


def _separable_start(
    guess: np.ndarray,
    t: np.ndarray,
    current: np.ndarray,
    voltage: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
) -> np.ndarray:
    """
    Pick the starting point of the damped iterations.

    Candidates are the guess time constants and every ordered pair of a log
    grid spanning the sampling step to ten times the window, each with its
    least-squares resistances. Candidates outside the bounds are skipped. The
    guess itself is kept when no candidate does better.
    """
    step = float(np.min(np.diff(t)))
    grid = np.geomspace(
        max(lower[2], lower[4], step), min(upper[2], upper[4], 10.0 * t[-1]), _GRID_POINTS
    )
    pairs = [(guess[2], guess[4]), *combinations(grid, 2)]

    best, best_cost = guess, _cost(guess, t, current, voltage)[1]
    for tau1, tau2 in pairs:
        candidate = _solve_resistances(tau1, tau2, t, current, voltage)
        if np.any(candidate < lower) or np.any(candidate > upper):
            continue
        _, cost = _cost(candidate, t, current, voltage)
        if np.isfinite(cost) and cost < best_cost:
            best, best_cost = candidate, cost
    return best


def _bounded_step(x: np.ndarray, step: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """
    Move from x along step without leaving [lo, hi].

    Components already on a bound and pointing outward are frozen; the rest
    of the step is shortened as a whole so that it stops at the first bound
    it meets, and never moves any log-parameter by more than _MAX_LOG_STEP.
    """
    step = step.copy()
    step[(x <= lo) & (step < 0)] = 0.0
    step[(x >= hi) & (step > 0)] = 0.0
    largest = float(np.max(np.abs(step)))
    if largest == 0.0:
        return x
    alpha = min(1.0, _MAX_LOG_STEP / largest)
    with np.errstate(divide="ignore", invalid="ignore"):
        room = np.where(step > 0, (hi - x) / step, np.where(step < 0, (lo - x) / step, np.inf))
    alpha = min(alpha, float(np.min(room)))
    moved = np.clip(x + alpha * step, lo, hi)
    # Components that limited the step land exactly on their bound.
    blocked = room <= alpha
    moved[blocked & (step > 0)] = hi[blocked & (step > 0)]
    moved[blocked & (step < 0)] = lo[blocked & (step < 0)]
    return moved


def _condition_warning(theta: np.ndarray, t: np.ndarray, current: np.ndarray) -> bool:
    # Relative sensitivities, so the test does not depend on units.
    scaled = model_jacobian(theta, current, t) * theta
    singular = np.linalg.svd(scaled, compute_uv=False)
    if singular[0] == 0 or singular[-1] < _CONDITION_LIMIT * singular[0]:
        return True
    tau1, tau2 = theta[2], theta[4]
    return bool(abs(tau1 - tau2) <= _TAU_MERGE * max(tau1, tau2))


def _lag1_autocorr(res: np.ndarray) -> float:
    energy = float(res @ res)
    if energy == 0.0:
        return 0.0
    return float(res[:-1] @ res[1:]) / energy


def fit_pulse(trace: PulseTrace, options: Optional[FitOptions] = None) -> FitReport:
    """
    Fit the circuit parameters to the in-window part of a pulse.

    Damped Gauss-Newton on the logarithm of the parameters: the damping is
    divided by 10 after an accepted step and multiplied by 10 after a
    rejected one, and steps are shortened to stay inside the bounds. The
    iterations start from the best of the initial guess and a grid of time
    constants with least-squares resistances. Voltages outside the window
    reach the result only through the initial guess, and only when no
    in-bounds grid candidate fits better than it.

    A fit that stops with a parameter on a bound is reported as not
    converged and carries condition_warning.

    Args:
        trace (PulseTrace): The measured pulse
        options (Optional[FitOptions]): Solver settings, defaults if None

    Raises:
        InsufficientDataError: Fewer than 6 in-window samples, a trace the initial
            guess cannot use, or zero current
        FitDivergenceError: If the cost becomes non-finite

    Returns:
        FitReport: Normalized parameters (tau1 <= tau2) and fit diagnostics
    """
    options = options or FitOptions()
    window = options.window
    count = int(np.count_nonzero(trace.in_window(window)))
    if count < MIN_FIT_SAMPLES:
        raise InsufficientDataError(
            f"battery {trace.battery_id} cycle {trace.cycle_index}: "
            f"{count} samples in [{window.t_min}, {window.t_max}] s, "
            f"need {MIN_FIT_SAMPLES}"
        )
    sub = trace.restricted(window)
    t, current, voltage = sub.arrays()
    if not np.any(current):
        raise InsufficientDataError("pulse current is zero over the fit window")

    lower = np.asarray(options.lower_bounds, dtype=float)
    upper = np.asarray(options.upper_bounds, dtype=float)
    guess = initial_guess(trace, window, lower, upper).as_array()
    theta = _separable_start(guess, t, current, voltage, lower, upper)

    res, cost = _cost(theta, t, current, voltage)
    if not np.isfinite(cost):
        raise FitDivergenceError(
            "non-finite cost at the starting point", EcmParams.from_array(theta)
        )
    lo, hi = np.log(lower), np.log(upper)
    x = np.log(theta)
    signal = float(voltage @ voltage)
    history = [cost]
    damping = options.initial_damping
    converged = cost <= _EXACT_FIT * signal
    iterations = 0

    while not converged and iterations < options.max_iterations:
        iterations += 1
        jac = model_jacobian(theta, current, t) * theta
        gradient = jac.T @ res
        normal = jac.T @ jac
        scale = np.diag(normal).copy()
        scale[scale <= 0] = max(float(scale.max()), 1.0) * 1e-30

        accepted = False
        while damping <= _MAX_DAMPING:
            try:
                step = np.linalg.solve(normal + damping * np.diag(scale), gradient)
            except np.linalg.LinAlgError:
                damping *= 10
                continue
            new_x = _bounded_step(x, step, lo, hi)
            candidate = np.exp(new_x)
            new_res, new_cost = _cost(candidate, t, current, voltage)
            if not np.isfinite(new_cost):
                raise FitDivergenceError(
                    f"non-finite cost at iteration {iterations}",
                    EcmParams.from_array(theta),
                )
            if new_cost < cost:
                accepted = True
                break
            damping *= 10

        if not accepted:
            converged = True
            break

        rel_step = float(np.max(np.abs(new_x - x)))
        rel_drop = (cost - new_cost) / cost
        near_gauss_newton = damping <= options.initial_damping
        x, theta, res, cost = new_x, candidate, new_res, new_cost
        history.append(cost)
        damping = max(damping / 10, _MIN_DAMPING)

        if cost <= _EXACT_FIT * signal:
            converged = True
        elif near_gauss_newton and (
            rel_drop < options.cost_tolerance or rel_step < options.param_tolerance
        ):
            converged = True

    # A stop against a bound is not a minimum of the unconstrained problem.
    stuck_on_bound = bool(np.any(x <= lo) or np.any(x >= hi))
    if stuck_on_bound:
        converged = False
        log.warning(
            f"battery {trace.battery_id} cycle {trace.cycle_index}: "
            f"fit stopped on a parameter bound (sse={cost:.6g})"
        )
    elif not converged:
        log.warning(
            f"battery {trace.battery_id} cycle {trace.cycle_index}: "
            f"no convergence after {iterations} iterations (sse={cost:.6g})"
        )

    warning = stuck_on_bound or _condition_warning(theta, t, current)
    params = EcmParams.from_array(theta).normalized()
    return FitReport(
        params=params,
        sse=cost,
        iterations=iterations,
        converged=converged,
        residual_rms=float(np.sqrt(cost / t.size)),
        condition_warning=warning,
        residual_autocorr=_lag1_autocorr(res),
        sse_history=tuple(history),
    )
