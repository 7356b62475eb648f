"""Exception types raised by :mod:`qrobot`."""

from __future__ import annotations


class QRobotError(Exception):
    """Base class for all package errors."""


class ValidationError(QRobotError, ValueError):
    """A parameter, configuration or register value is out of range."""


class DegenerateKernelError(QRobotError):
    """An action kernel vanishes at some momentum and cannot be unitarized."""


class AuditError(QRobotError):
    """A unitarity audit exceeded its tolerance.

    ``worst`` holds the ``(row, column)`` pair of the largest Gram deviation.
    """

    def __init__(self, message: str, deviation: float, worst: tuple[int, int]):
        super().__init__(message)
        self.deviation = deviation
        self.worst = worst


class NormDriftError(QRobotError):
    """State norm drifted beyond the tolerated bound during evolution."""


class FormatError(QRobotError):
    """A persisted operator or state file is malformed or mismatched."""
