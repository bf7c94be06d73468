# Copyright (c) 2026, The pulse-soh authors. All rights reserved.
"""Tests for main.py file."""

from pathlib import Path
from typing import Callable, List

import numpy as np
import pandas as pd
import pytest

from pulse_soh.main import main
from pulse_soh.models import CycleRecord, EcmParams, FeatureRow, FitReport, PulseTrace
from pulse_soh.utils import (
    read_cycles,
    read_features,
    read_model,
    read_params,
    write_cycles,
    write_features,
    write_params,
    write_pulse_trace,
)


def _read_report(path: Path) -> pd.DataFrame:
    return pd.read_csv(path, dtype={"battery_id": str}).set_index("battery_id")


def _files(root: Path) -> dict:
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_fit_requires_inputs(tmp_path: Path):
    """Test that an empty input list is a usage error."""
    with pytest.raises(SystemExit) as e:
        main(["fit", "--out", str(tmp_path / "params.csv")])
    assert e.value.code == 2


def test_fit(
    tmp_path: Path, make_trace: Callable[..., PulseTrace], reference_params: EcmParams
):
    """Test that every trace file gets a row in the params CSV."""
    paths = [
        write_pulse_trace(make_trace(reference_params, cycle_index=c), tmp_path / "traces")
        for c in (2, 1, 3)
    ]
    out = tmp_path / "params.csv"
    assert main(["fit", *map(str, paths), "--out", str(out), "--workers", "2"]) == 0
    fits = read_params(out)
    assert sorted(fits) == [("1", 1), ("1", 2), ("1", 3)]
    for params in fits.values():
        assert params.tau2 == pytest.approx(reference_params.tau2, rel=1e-4)


def test_fit_unreadable_file(
    tmp_path: Path, make_trace: Callable[..., PulseTrace], reference_params: EcmParams
):
    """Test that a bad file fails the run while the other traces are still fitted."""
    good = write_pulse_trace(make_trace(reference_params), tmp_path)
    bad = tmp_path / "b1_c2.csv"
    bad.write_text("t_s,current_a,voltage_delta_v\n0,-60,oops\n")
    out = tmp_path / "params.csv"
    assert main(["fit", str(good), str(bad), "--out", str(out)]) == 1
    assert list(read_params(out)) == [("1", 1)]


def test_fit_duplicated_key(
    tmp_path: Path, make_trace: Callable[..., PulseTrace], reference_params: EcmParams
):
    """Test that two files holding the same pulse are refused."""
    trace = make_trace(reference_params)
    first = write_pulse_trace(trace, tmp_path / "a")
    second = write_pulse_trace(trace, tmp_path / "b")
    out = tmp_path / "params.csv"
    assert main(["fit", str(first), str(second), "--out", str(out)]) == 1
    assert not out.exists()


def test_fit_missing_input(tmp_path: Path):
    """Test that a missing input path is reported before any work."""
    missing = tmp_path / "b1_c1.csv"
    assert main(["fit", str(missing), "--out", str(tmp_path / "params.csv")]) == 1


def test_simulate_is_deterministic(tmp_path: Path):
    """Test that the same spec and seed write byte-identical outputs."""
    spec = tmp_path / "spec.json"
    spec.write_text(
        '[{"battery_id": "1", "burn_in_cycles": 3, "n_cycles": 8},'
        ' {"battery_id": "2", "burn_in_cycles": 2, "n_cycles": 6, "final_soh": 95}]'
    )
    for name in ("a", "b"):
        args = ["simulate", "--spec", str(spec), "--seed", "7", "--out-dir", str(tmp_path / name)]
        assert main(args) == 0

    first, second = _files(tmp_path / "a"), _files(tmp_path / "b")
    assert first == second
    assert len([p for p in first if p.parts[0] == "traces"]) == 14
    assert len(read_cycles(tmp_path / "a" / "cycles.csv")) == 14

    other = tmp_path / "c"
    assert main(["simulate", "--spec", str(spec), "--seed", "8", "--out-dir", str(other)]) == 0
    assert _files(other) != first


def test_simulate_no_cycles(tmp_path: Path):
    """Test that a battery with no cycles gives header-only files."""
    spec = tmp_path / "spec.json"
    spec.write_text('[{"battery_id": "1", "n_cycles": 0}]')
    out_dir = tmp_path / "out"
    assert main(["simulate", "--spec", str(spec), "--out-dir", str(out_dir)]) == 0
    assert (out_dir / "cycles.csv").read_text() == "battery_id,cycle_index,discharged_ah\n"
    assert (out_dir / "ground_truth.csv").read_text().count("\n") == 1
    assert list((out_dir / "traces").iterdir()) == []


def test_simulate_invalid_spec(tmp_path: Path):
    """Test that a spec that fails validation fails the run."""
    spec = tmp_path / "spec.json"
    spec.write_text('[{"battery_id": "1", "pulse_current": 0}]')
    assert main(["simulate", "--spec", str(spec), "--out-dir", str(tmp_path / "out")]) == 1


@pytest.fixture
def drifting_battery(tmp_path: Path, reference_params: EcmParams) -> Path:
    """Write the cycles log and params CSV of one 300-cycle battery."""
    capacities = 105.0 - 10.0 * np.arange(300) / 299
    records = [
        CycleRecord(battery_id="2", cycle_index=i + 1, discharged_ah=float(ah))
        for i, ah in enumerate(capacities)
    ]
    report = FitReport(
        params=reference_params, sse=0.0, iterations=1, converged=True, residual_rms=0.0
    )
    write_cycles(records, tmp_path / "cycles.csv")
    write_params([("2", r.cycle_index, report) for r in records], tmp_path / "params.csv")
    (tmp_path / "corrections.csv").write_text(
        "battery_id,cycle_from,cycle_to,delta_ah\n2,51,259,-1.0\n"
    )
    return tmp_path


def test_pipeline_corrections(drifting_battery: Path):
    """Test that a -1 Ah correction shifts SoH by 100 / reference on its range only."""
    root = drifting_battery
    common = [
        "pipeline",
        "--params",
        str(root / "params.csv"),
        "--cycles",
        str(root / "cycles.csv"),
        "--window",
        "1",
        "--reference",
        "105",
    ]
    assert main([*common, "--out", str(root / "plain.csv")]) == 0
    corrected_args = ["--corrections", str(root / "corrections.csv")]
    assert main([*common, *corrected_args, "--out", str(root / "corrected.csv")]) == 0

    plain = read_features(root / "plain.csv")
    corrected = read_features(root / "corrected.csv")
    assert len(plain) == len(corrected) == 300
    for before, after in zip(plain, corrected, strict=True):
        expected = -100.0 / 105.0 if 51 <= before.cycle_index <= 259 else 0.0
        assert after.soh_percent - before.soh_percent == pytest.approx(expected, abs=1e-9)
        assert after.features() == before.features()


def test_pipeline_analysis_tables(drifting_battery: Path):
    """Test the optional correlation and drift tables."""
    root = drifting_battery
    args = [
        "pipeline",
        "--params",
        str(root / "params.csv"),
        "--cycles",
        str(root / "cycles.csv"),
        "--out",
        str(root / "features.csv"),
        "--correlation-out",
        str(root / "correlation.csv"),
        "--drift-out",
        str(root / "drift.csv"),
    ]
    assert main(args) == 0
    correlation = pd.read_csv(root / "correlation.csv")
    assert list(correlation["parameter"]) == ["r_int", "r1", "tau1", "r2", "tau2"]
    assert (correlation["row_count"] == 300).all()
    drift = pd.read_csv(root / "drift.csv")
    assert np.allclose(drift[["r1", "r2", "tau1", "tau2"]].to_numpy(), 0.0)


def test_pipeline_orphan_fit(drifting_battery: Path, reference_params: EcmParams):
    """Test that a fit with no cycle record fails the run."""
    root = drifting_battery
    report = FitReport(
        params=reference_params, sse=0.0, iterations=1, converged=True, residual_rms=0.0
    )
    write_params([("9", 1, report)], root / "orphan.csv")
    args = [
        "pipeline",
        "--params",
        str(root / "orphan.csv"),
        "--cycles",
        str(root / "cycles.csv"),
        "--out",
        str(root / "features.csv"),
    ]
    assert main(args) == 1


@pytest.fixture
def linear_features(tmp_path: Path, make_rows: Callable[..., List[FeatureRow]]) -> Path:
    """Write exact-linear features of batteries 1 and 2."""
    rows = make_rows(battery_id="1", seed=0) + make_rows(battery_id="2", seed=1)
    return write_features(rows, tmp_path / "features.csv")


def test_train_and_eval(tmp_path: Path, linear_features: Path):
    """Test that exact-linear features give MAE 0 and R2 1 on the held-out battery."""
    model_path = tmp_path / "model.json"
    args = ["train", "--features", str(linear_features), "--train-ids", "1"]
    assert main([*args, "--out", str(model_path)]) == 0
    model = read_model(model_path)
    assert model.kind == "ols"
    assert model.training_meta.battery_ids == ["1"]
    assert model.training_meta.row_count == 40
    assert model.training_meta.train_mae < 1e-8

    report_path, residuals_path = tmp_path / "report.csv", tmp_path / "residuals.csv"
    args = [
        "eval",
        "--features",
        str(linear_features),
        "--model",
        str(model_path),
        "--test-ids",
        "2",
        "--out",
        str(report_path),
        "--residuals-out",
        str(residuals_path),
    ]
    assert main(args) == 0
    report = _read_report(report_path)
    assert list(report.index) == ["2"]
    assert report.loc["2", "mae_percent"] < 1e-8
    assert report.loc["2", "r2"] == pytest.approx(1.0, abs=1e-9)
    residuals = pd.read_csv(residuals_path)
    assert len(residuals) == 40
    assert residuals["error_percent"].abs().max() < 1e-7


@pytest.mark.parametrize("kind", ["huber", "theil_sen"])
def test_eval_trains_in_place(tmp_path: Path, linear_features: Path, kind: str):
    """Test that eval trains on --train-ids when no model file is given."""
    report_path = tmp_path / "report.csv"
    args = [
        "eval",
        "--features",
        str(linear_features),
        "--kind",
        kind,
        "--max-subsets",
        "500",
        "--train-ids",
        "1",
        "--test-ids",
        "2",
        "--out",
        str(report_path),
    ]
    assert main(args) == 0
    assert _read_report(report_path).loc["2", "mae_percent"] < 1e-6


@pytest.mark.parametrize(
    "selection",
    [
        ["--test-ids", "2"],
        ["--train-ids", "1", "--test-ids", "1"],
        ["--train-ids", "1", "--test-ids", "7"],
    ],
)
def test_eval_bad_selection(tmp_path: Path, linear_features: Path, selection: List[str]):
    """Test that eval without training batteries, with overlap or unknown ids fails."""
    args = ["eval", "--features", str(linear_features), "--out", str(tmp_path / "report.csv")]
    assert main([*args, *selection]) == 1


def test_eval_refuses_training_batteries(tmp_path: Path, linear_features: Path):
    """Test that a model is never evaluated on a battery it was trained on."""
    model_path = tmp_path / "model.json"
    args = ["train", "--features", str(linear_features), "--train-ids", "1"]
    assert main([*args, "--out", str(model_path)]) == 0
    args = [
        "eval",
        "--features",
        str(linear_features),
        "--model",
        str(model_path),
        "--test-ids",
        "1",
        "2",
        "--out",
        str(tmp_path / "report.csv"),
    ]
    assert main(args) == 1
    assert not (tmp_path / "report.csv").exists()


@pytest.fixture(scope="module")
def campaign(tmp_path_factory: pytest.TempPathFactory) -> Path:
    """Simulate the default four-battery campaign and fit every pulse."""
    root = tmp_path_factory.mktemp("campaign")
    assert main(["simulate", "--seed", "0", "--out-dir", str(root)]) == 0
    traces = sorted(str(p) for p in (root / "traces").glob("*.csv"))
    assert main(["fit", *traces, "--out", str(root / "params.csv")]) == 0
    return root


def _pipeline(root: Path, cycles: Path, out: Path, *extra: str) -> Path:
    args = ["pipeline", "--params", str(root / "params.csv"), "--cycles", str(cycles)]
    assert main([*args, "--out", str(out), *extra]) == 0
    return out


def _cross_eval(features: Path, out: Path, *test_ids: str) -> pd.DataFrame:
    args = ["eval", "--features", str(features), "--train-ids", "3", "4", "--test-ids"]
    assert main([*args, *test_ids, "--out", str(out)]) == 0
    return _read_report(out)


@pytest.mark.slow
def test_cross_battery_regime(campaign: Path):
    """Test that OLS trained on batteries 3 and 4 tracks the SoH of batteries 1 and 2."""
    features = _pipeline(campaign, campaign / "cycles.csv", campaign / "features.csv")
    report = _cross_eval(features, campaign / "report.csv", "1", "2")
    assert list(report.index) == ["1", "2"]
    assert (report["mae_percent"] <= 1.3).all()
    assert (report["r2"] >= 0.75).all()


@pytest.mark.slow
def test_capacity_jump_correction(campaign: Path):
    """Test that a declared correction undoes a 1 Ah jump in the capacity log."""
    records = read_cycles(campaign / "cycles.csv")
    jumped = [
        r.model_copy(update={"discharged_ah": r.discharged_ah - 1.0})
        if r.battery_id == "2" and 150 <= r.cycle_index <= 300
        else r
        for r in records
    ]
    write_cycles(jumped, campaign / "jumped_cycles.csv")
    (campaign / "corrections.csv").write_text(
        "battery_id,cycle_from,cycle_to,delta_ah\n2,150,300,1.0\n"
    )

    clean = _cross_eval(
        _pipeline(campaign, campaign / "cycles.csv", campaign / "clean.csv"),
        campaign / "clean_report.csv",
        "2",
    )
    broken = _cross_eval(
        _pipeline(campaign, campaign / "jumped_cycles.csv", campaign / "broken.csv"),
        campaign / "broken_report.csv",
        "2",
    )
    fixed = _cross_eval(
        _pipeline(
            campaign,
            campaign / "jumped_cycles.csv",
            campaign / "fixed.csv",
            "--corrections",
            str(campaign / "corrections.csv"),
        ),
        campaign / "fixed_report.csv",
        "2",
    )
    assert broken.loc["2", "mae_percent"] > clean.loc["2", "mae_percent"]
    assert broken.loc["2", "r2"] < clean.loc["2", "r2"]
    assert fixed.loc["2", "mae_percent"] == pytest.approx(clean.loc["2", "mae_percent"], rel=0.2)
    assert fixed.loc["2", "r2"] == pytest.approx(clean.loc["2", "r2"], rel=0.2)
