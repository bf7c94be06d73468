# Copyright (c) 2026, The pulse-soh authors. All rights reserved.
"""Shared fixtures of the test suite."""

from typing import Callable, List, Optional, Sequence

import numpy as np
import pytest

from pulse_soh.ecm import model_values
from pulse_soh.models import EcmParams, FeatureRow, PulseTrace


@pytest.fixture
def reference_params() -> EcmParams:
    """Return the parameters of a fresh 105 Ah cell."""
    return EcmParams(r_int=1.0e-3, r1=0.5e-3, tau1=1.0, r2=0.8e-3, tau2=20.0)


@pytest.fixture
def make_trace() -> Callable[..., PulseTrace]:
    """Return a factory of pulse traces generated from known parameters."""

    def _make(
        params: EcmParams,
        current: float = -60.0,
        duration: float = 10.0,
        sample_rate: float = 10.0,
        noise: float = 0.0,
        seed: int = 0,
        battery_id: str = "1",
        cycle_index: int = 1,
    ) -> PulseTrace:
        n = int(round(duration * sample_rate)) + 1
        t = np.arange(n) / sample_rate
        voltage = model_values(params.as_array(), current, t)
        voltage = voltage + np.random.default_rng(seed).normal(0.0, noise, n) if noise else voltage
        return PulseTrace(
            t=tuple(t.tolist()),
            current=(current,) * n,
            voltage_delta=tuple(voltage.tolist()),
            battery_id=battery_id,
            cycle_index=cycle_index,
        )

    return _make


@pytest.fixture
def make_rows() -> Callable[..., List[FeatureRow]]:
    """Return a factory of feature rows whose SoH is an exact affine map of the features."""

    def _make(
        coefficients: Sequence[float] = (2.0e4, -1.0e4, -5.0, 0.5),
        intercept: float = 85.0,
        n: int = 40,
        battery_id: str = "1",
        seed: int = 0,
        offsets: Optional[Sequence[float]] = None,
    ) -> List[FeatureRow]:
        rng = np.random.default_rng(seed)
        features = np.column_stack(
            [
                rng.uniform(0.5e-3, 0.7e-3, n),
                rng.uniform(0.8e-3, 1.0e-3, n),
                rng.uniform(1.0, 1.3, n),
                rng.uniform(20.0, 23.0, n),
            ]
        )
        soh = features @ np.asarray(coefficients) + intercept
        if offsets is not None:
            soh = soh + np.asarray(offsets)
        return [
            FeatureRow(
                battery_id=battery_id,
                cycle_index=i + 1,
                r1=f[0],
                r2=f[1],
                tau1=f[2],
                tau2=f[3],
                soh_percent=float(s),
            )
            for i, (f, s) in enumerate(zip(features, soh, strict=True))
        ]

    return _make
