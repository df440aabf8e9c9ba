"""
Exception hierarchy for the debonding toolkit.

Every error carries an ``exit_code`` that the command-line front end maps
straight to the process status:

    2  configuration could not be parsed or validated
    3  solver or input error (domains, toughness, incompatible data)
    4  InfeasibleTime
    5  DeadEnd / NoTermination / C1SwitchViolation / ConstraintViolated
    6  ContinuityFailure
"""


class DebondError(Exception):
    """Base class for all library errors."""

    exit_code = 3


class ConfigError(DebondError):
    exit_code = 2


class DomainError(DebondError):
    """A query fell outside the domain of a sampled function."""


class RangeError(DebondError):
    """An inverse query fell outside the range of a monotone map."""


class InvalidToughness(DebondError):
    pass


class SpeedOutOfRange(DebondError):
    pass


class IncompatibleData(DebondError):
    """Initial data, control and toughness violate the compatibility conditions."""


class IncompatibleTarget(IncompatibleData):
    """Target state matches neither the passive nor the active terminal relation."""


class StepTooLarge(DebondError):
    pass


class HorizonExceeded(DebondError):
    pass


class InfeasibleTime(DebondError):
    exit_code = 4


class DeadEnd(DebondError):
    exit_code = 5


class NoTermination(DebondError):
    exit_code = 5


class C1SwitchViolation(DebondError):
    exit_code = 5


class ConstraintViolated(DebondError):
    exit_code = 5

    def __init__(self, message: str, excess: float = 0.0):
        super().__init__(message)
        self.excess = excess


class ContinuityFailure(DebondError):
    exit_code = 6


class AmbiguityNote(UserWarning):
    """Terminal state satisfies both the passive and the active relation."""
