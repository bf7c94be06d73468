# Copyright (c) 2026, The pulse-soh authors. All rights reserved.
"""Exceptions raised by the pulse_soh package."""

from typing import Any, List, Optional, Sequence, Tuple


class PulseSohError(Exception):
    """Base class of every pulse_soh error."""


class DomainError(PulseSohError, ValueError):
    """Input outside the domain of the pulse model (negative time, bad params)."""


class DegenerateWindowError(PulseSohError, ValueError):
    """Fit or scoring window holding too few samples."""


class InsufficientDataError(PulseSohError, ValueError):
    """Not enough samples or rows, or a zero-current trace."""


class FitDivergenceError(PulseSohError, ValueError):
    """
    The solver produced a non-finite cost.

    Args:
        message (str): What went wrong
        last_params (Any): The last iterate with a finite cost
    """

    def __init__(self, message: str, last_params: Any) -> None:
        """Keep the last good iterate for the caller."""
        super().__init__(message)
        self.last_params = last_params


class InvalidCorrectionError(PulseSohError, ValueError):
    """Capacity correction that is malformed or leaves a non-positive capacity."""


class UnlabeledRecordError(PulseSohError, ValueError):
    """Cycle record without a SoH label where one is required."""


class ReferenceCapacityError(PulseSohError, ValueError):
    """Non-positive reference capacity for SoH labelling."""


class CollinearityError(PulseSohError, ValueError):
    """
    Rank-deficient design matrix.

    Args:
        message (str): What went wrong
        columns (Sequence[str]): Names of the columns involved in the dependency
    """

    def __init__(self, message: str, columns: Sequence[str]) -> None:
        """Keep the offending columns."""
        super().__init__(message)
        self.columns = list(columns)


class MetricError(PulseSohError, ValueError):
    """Metric called on mismatched or degenerate vectors."""


class BatterySelectionError(PulseSohError, ValueError):
    """Overlapping, empty or missing battery id sets."""


class SimulationError(PulseSohError, ValueError):
    """Simulator inputs that cannot produce a valid campaign."""


class ParseError(PulseSohError, ValueError):
    """
    Malformed input file.

    Args:
        path (str): The file that failed to parse
        line (Optional[int]): 1-based line number, None when unknown
        reason (str): What is wrong with it
    """

    def __init__(self, path: str, line: Optional[int], reason: str) -> None:
        """Build the message from the location."""
        where = f"{path}:{line}" if line is not None else path
        super().__init__(f"{where}: {reason}")
        self.path = path
        self.line = line


class DuplicateKeyError(PulseSohError, ValueError):
    """Same (battery_id, cycle_index) seen twice."""


class JoinError(PulseSohError, ValueError):
    """
    Keys present on one side of a join only.

    Args:
        message (str): What went wrong
        orphans (List[Tuple[str, int]]): The unmatched (battery_id, cycle_index) keys
    """

    def __init__(self, message: str, orphans: List[Tuple[str, int]]) -> None:
        """Keep the orphan keys."""
        super().__init__(message)
        self.orphans = orphans
