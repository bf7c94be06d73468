# Copyright (c) 2026, The pulse-soh authors. All rights reserved.
"""
Synthetic aging campaigns with known ground truth.

Default drift and noise values below are constants of this toolkit, chosen
to give a campaign shaped like a 105 Ah LiFePO4 cycling test. They are not
measured data.
"""

from typing import List, Sequence, Tuple

import numpy as np
from loguru import logger as log

from pulse_soh.config import BURN_IN_RANGE
from pulse_soh.ecm import model_values
from pulse_soh.exceptions import SimulationError
from pulse_soh.models import BatterySpec, CycleRecord, DriftProfile, EcmParams, PulseTrace


def default_paper_profile() -> DriftProfile:
    """
    Drift profile of the default campaign.

    Resistances grow about 1.5 % of their fresh value per SoH point lost,
    tau1 about 2 % and tau2 about 1 %.

    Returns:
        DriftProfile: The documented default
    """
    return DriftProfile(
        base=EcmParams(r_int=1.0e-3, r1=0.5e-3, tau1=1.0, r2=0.8e-3, tau2=20.0),
        slope=(1.5e-5, 0.75e-5, 0.02, 1.2e-5, 0.2),
    )


def default_campaign_specs(seed: int = 0) -> List[BatterySpec]:
    """
    The four-battery campaign: burn-in drawn in [60, 80] cycles.

    Batteries 3 and 4 are cycled down to 85 % SoH, batteries 1 and 2 only
    down to 90 %.

    Args:
        seed (int): Seed of the burn-in draws

    Returns:
        List[BatterySpec]: Specs of batteries "1" to "4"
    """
    rng = np.random.default_rng(seed)
    low, high = BURN_IN_RANGE
    burn_ins = rng.integers(low, high + 1, size=4)
    specs = []
    for number, burn_in in enumerate(burn_ins, start=1):
        final_soh, fade_cycles = (90.0, 250) if number <= 2 else (85.0, 375)
        specs.append(
            BatterySpec(
                battery_id=str(number),
                burn_in_cycles=int(burn_in),
                n_cycles=int(burn_in) + 1 + fade_cycles,
                final_soh=final_soh,
            )
        )
    return specs


def soh_curve(spec: BatterySpec, profile: DriftProfile) -> np.ndarray:
    """
    Ground-truth SoH of every cycle of one battery.

    The burn-in is a quadratic ramp from 100 - burn_in_depth up to 100 at
    position burn_in_cycles; the fade then reaches final_soh at the last cycle.

    Args:
        spec (BatterySpec): The battery
        profile (DriftProfile): Fade shape and burn-in depth

    Returns:
        np.ndarray: One value per cycle, in percent
    """
    position = np.arange(spec.n_cycles, dtype=float)
    burn_in = spec.burn_in_cycles
    final_soh = spec.final_soh if spec.final_soh is not None else profile.final_soh
    soh = np.full(spec.n_cycles, 100.0)

    ramp = position < burn_in
    if burn_in > 0:
        soh[ramp] = 100.0 - profile.burn_in_depth * (1.0 - position[ramp] / burn_in) ** 2

    fade_span = spec.n_cycles - 1 - burn_in
    if fade_span > 0:
        progress = (position[~ramp] - burn_in) / fade_span
        if profile.fade_shape == "exponential":
            rate = 1.0 / profile.fade_time_fraction
            shape = -np.expm1(-rate * progress) / -np.expm1(-rate)
        else:
            shape = progress
        soh[~ramp] = 100.0 - (100.0 - final_soh) * shape
        soh[-1] = final_soh
    return soh


def _lowest_soh(specs: Sequence[BatterySpec], profile: DriftProfile) -> float:
    lowest = 100.0 - profile.burn_in_depth
    for spec in specs:
        final_soh = spec.final_soh if spec.final_soh is not None else profile.final_soh
        lowest = min(lowest, final_soh)
    return lowest


def _simulate_battery(
    spec: BatterySpec, profile: DriftProfile, seed: np.random.SeedSequence
) -> Tuple[List[CycleRecord], List[PulseTrace]]:
    rng = np.random.default_rng(seed)
    n = spec.n_cycles
    n_samples = int(round(spec.pulse_duration * spec.sample_rate)) + 1
    t = np.arange(n_samples) / spec.sample_rate

    soh = soh_curve(spec, profile)
    capacity_noise = rng.normal(0.0, profile.capacity_sigma, size=n)
    jitter = rng.normal(0.0, 1.0, size=(n, 5))
    voltage_noise = rng.normal(0.0, profile.voltage_sigma, size=(n, n_samples))

    params = profile.params_at(soh) * np.exp(profile.param_jitter * jitter)
    capacity = soh / 100.0 * spec.nominal_ah + capacity_noise
    if np.any(capacity <= 0):
        raise SimulationError(f"battery {spec.battery_id}: simulated capacity is not positive")

    records, traces = [], []
    current = np.full(n_samples, spec.pulse_current)
    for position in range(n):
        cycle_index = position + 1
        truth = EcmParams.from_array(params[position])
        voltage = model_values(params[position], current, t) + voltage_noise[position]
        records.append(
            CycleRecord(
                battery_id=spec.battery_id,
                cycle_index=cycle_index,
                discharged_ah=float(capacity[position]),
                params=truth,
                soh_percent=float(soh[position]),
            )
        )
        traces.append(
            PulseTrace(
                t=tuple(t.tolist()),
                current=tuple(current.tolist()),
                voltage_delta=tuple(voltage.tolist()),
                battery_id=spec.battery_id,
                cycle_index=cycle_index,
                ambient_temp_celsius=spec.ambient_temp_celsius,
            )
        )
    return records, traces


def simulate_campaign(
    specs: Sequence[BatterySpec], profile: DriftProfile, seed: int = 0
) -> Tuple[List[CycleRecord], List[PulseTrace]]:
    """
    Generate cycle records with ground truth and one noisy pulse per cycle.

    Each battery draws from its own stream spawned from the seed, so the
    result of a battery does not depend on the others.

    Args:
        specs (Sequence[BatterySpec]): The batteries, nonempty
        profile (DriftProfile): Parameter drift, fade and noise levels
        seed (int): Campaign seed

    Raises:
        SimulationError: No specs, duplicated ids, or a drift reaching a non-positive parameter

    Returns:
        Tuple[List[CycleRecord], List[PulseTrace]]: Records carry the true params and SoH
    """
    if not specs:
        raise SimulationError("at least one battery spec is required")
    ids = [s.battery_id for s in specs]
    if len(set(ids)) != len(ids):
        raise SimulationError(f"duplicated battery ids in {ids}")
    violations = profile.positivity_violations(_lowest_soh(specs, profile))
    if violations:
        raise SimulationError(
            f"drift profile is not positive over the simulated SoH range: {', '.join(violations)}"
        )

    records: List[CycleRecord] = []
    traces: List[PulseTrace] = []
    streams = np.random.SeedSequence(seed).spawn(len(specs))
    for spec, stream in zip(specs, streams, strict=True):
        battery_records, battery_traces = _simulate_battery(spec, profile, stream)
        records.extend(battery_records)
        traces.extend(battery_traces)
        log.debug(f"battery {spec.battery_id}: simulated {spec.n_cycles} cycle(s)")
    log.info(f"simulated {len(specs)} battery(ies), {len(records)} cycle(s)")
    return records, traces
