# -*- coding: UTF-8 -*-


class RedSimError(Exception):
    """Base exception class."""


class IllegalOperation(RedSimError):
    """Exception raised for calls to restricted methods."""


class ArgumentError(RedSimError):
    """Exception raised for argument errors."""


class RegistryKeyError(RedSimError):
    """Exception raised for registry key errors."""


class MissingKeyError(RedSimError):
    """Exception raised for missing keys."""


class DuplicateKeyError(RedSimError):
    """Exception raised for duplicate keys."""


class SchedulingError(RedSimError):
    """Exception raised for events scheduled in the simulated past."""


class AqmError(RedSimError):
    """Exception raised for packets the queue manager cannot judge."""


class PhaseError(AqmError):
    """Exception raised when a count update runs in the wrong phase."""


class TransportError(RedSimError):
    """Exception raised for impossible sender/receiver input."""


class TopologyError(RedSimError):
    """Exception raised for routing and wiring errors."""


class ConservationError(RedSimError):
    """Exception raised when the packet ledger does not balance."""


class MetricsError(RedSimError):
    """Exception raised for undefined or unaligned measurements."""


class AnalysisError(RedSimError):
    """Exception raised for invalid drop-law or goodput model input."""


class OracleToleranceError(AnalysisError):
    """Exception raised when a closed form and its oracle disagree."""


class ScenarioError(RedSimError):
    """
    Exception raised for scenario validation errors.
    Carries the offending field and, for scenario files, the line number.
    """

    def __init__(self, field: str, message: str, line: int = None, source: str = None):
        self.field = field
        self.line = line
        self.source = source
        super(ScenarioError, self).__init__(self._compose(field, message, line, source))

    @staticmethod
    def _compose(field: str, message: str, line: int, source: str) -> str:
        text = f"'{field}': {message}"
        if line is not None:
            text = f"line {line}: {text}"
        if source is not None:
            text = f"{source}:{text}" if line is not None else f"{source}: {text}"
        return text
