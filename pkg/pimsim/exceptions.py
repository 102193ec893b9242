from __future__ import annotations

from rest_framework import status
from rest_framework.response import Response
from rest_framework.views import exception_handler


class SimulationError(Exception):
    """Base class for every error raised by the simulator."""


class ConfigError(SimulationError):
    """Raised when a fabric configuration is inconsistent."""

    def __init__(self, message: str, *, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f'line {line}: {message}'
        super().__init__(message)


class ParseError(ConfigError):
    """Raised when a configuration line cannot be parsed."""


class UnknownKeyError(ParseError):
    """Raised when a configuration file names a key we do not know."""


class OutOfRangeError(SimulationError):
    """Raised when an address does not exist in the geometry."""


class CrossBankError(SimulationError):
    """Raised when a bank-local mechanism is asked to cross banks."""


class UnstagedBroadcastError(SimulationError):
    """
    Raised when a broadcast is requested for data that is not staged in a
    shared row.
    """


class BroadcastLimitError(SimulationError):
    """Raised when a broadcast names more destinations than allowed."""


class DoubleReleaseError(SimulationError):
    """Raised when releasing a claim the controller never granted."""


class CalibrationError(SimulationError):
    """Raised when power or compute calibration cannot be performed."""


class MissingComponentError(SimulationError):
    """Raised when the area table lacks a component for some variant."""


class UnsupportedWidthError(SimulationError):
    """Raised for operand widths the LUT decomposition cannot express."""


class CapacityError(SimulationError):
    """Raised when a workload needs more subarrays than the fabric has."""


class DeadlockError(SimulationError):
    """Raised when the scheduler cannot make progress."""


class IncomparablePlatformsError(SimulationError):
    """Raised when compared platforms differ in more than the mechanism."""


class TimingViolation(SimulationError):
    """Raised by strict callers when a command sequence breaks a rule."""

    def __init__(self, index: int, rule: str, message: str = '') -> None:
        self.index = index
        self.rule = rule
        super().__init__(
            message or f'command {index} violates {rule}')


def custom_exception_handler(exc, context):
    response = exception_handler(exc, context)
    if response:
        return Response(
            {'error': True, 'message': response.data},
            status=response.status_code)

    if isinstance(exc, SimulationError):
        return Response(
            {'error': True, 'message': str(exc)},
            status=status.HTTP_400_BAD_REQUEST)

    # fallback
    return Response(
        {'error': True, 'message': str(exc)},
        status=status.HTTP_500_INTERNAL_SERVER_ERROR)
