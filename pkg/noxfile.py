"""Nox sessions."""
import sys
from pathlib import Path
from textwrap import dedent

import nox


try:
    from nox_poetry import Session, session
except ImportError:
    message = f"""\
    Nox failed to import the 'nox-poetry' package.
    Please install it using the following command:
    {sys.executable} -m pip install nox-poetry"""
    raise SystemExit(dedent(message)) from None


package = "pulse_soh"
locations = ["pulse_soh", "tests", "noxfile.py"]
python_versions = ["3.10", "3.11"]
test_requirements = ["coverage[toml]", "pytest", "pytest-asyncio", "pytest-mock", "pygments"]
nox.needs_version = ">= 2021.6.6"
nox.options.sessions = (
    "lint",
    "tests",
)


@session(python=python_versions[0])
def lint(session: Session) -> None:
    """Check formatting, imports and style of the package and its tests."""
    args = session.posargs or locations
    session.install(
        "black",
        "darglint",
        "flake8",
        "flake8-bandit",
        "flake8-bugbear",
        "flake8-docstrings",
        "isort",
        "pep8-naming",
    )
    session.run("black", "--check", *args)
    session.run("isort", "--check-only", *args)
    session.run("flake8", "--max-line-length=100", *args)


@session(python=python_versions)
def tests(session: Session) -> None:
    """Run the fast test suite; the full simulated campaigns are left to `slow`."""
    session.install(".")
    session.install(*test_requirements)
    try:
        session.run(
            "coverage",
            "run",
            "--parallel",
            "-m",
            "pytest",
            *(session.posargs or ["-m", "not slow"]),
        )
    finally:
        if session.interactive:
            session.notify("coverage", posargs=[])


@session(python=python_versions[0])
def slow(session: Session) -> None:
    """Run the end-to-end tests over full simulated campaigns."""
    session.install(".")
    session.install(*test_requirements)
    session.run("pytest", "-m", "slow", *session.posargs)


@session(python=python_versions[0])
def campaign(session: Session) -> None:
    """Simulate a campaign and run it through every CLI step, from fit to eval."""
    session.install(".")
    out_dir = Path(session.create_tmp()) / "campaign"
    session.run("pulse-soh", "simulate", "--seed", "0", "--out-dir", str(out_dir))

    traces = sorted(str(p) for p in (out_dir / "traces").glob("b*_c*.csv"))
    session.run("pulse-soh", "fit", *traces, "--out", str(out_dir / "params.csv"))
    session.run(
        "pulse-soh",
        "pipeline",
        "--params",
        str(out_dir / "params.csv"),
        "--cycles",
        str(out_dir / "cycles.csv"),
        "--out",
        str(out_dir / "features.csv"),
    )
    session.run(
        "pulse-soh",
        "train",
        "--features",
        str(out_dir / "features.csv"),
        "--train-ids",
        "3",
        "4",
        "--out",
        str(out_dir / "model.json"),
    )
    session.run(
        "pulse-soh",
        "eval",
        "--features",
        str(out_dir / "features.csv"),
        "--model",
        str(out_dir / "model.json"),
        "--test-ids",
        "1",
        "2",
        "--out",
        str(out_dir / "report.csv"),
    )
    session.log((out_dir / "report.csv").read_text())


@session(python=python_versions[0])
def coverage(session: Session) -> None:
    """Produce the coverage report of `pulse_soh`."""
    args = session.posargs or ["report", f"--include={package}/*"]

    session.install("coverage[toml]")

    if not session.posargs and any(Path().glob(".coverage.*")):
        session.run("coverage", "combine")

    session.run("coverage", *args)
