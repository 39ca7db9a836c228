"""Exception hierarchy shared by every module of the package."""


class HabfError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(HabfError, ValueError):
    """Invalid sizes, ids or parameter combinations."""


class InvalidHashIdError(ConfigurationError):
    """A hash id outside ``[1, |H|]`` was used."""


class ArityError(ConfigurationError):
    """A hash-function set of the wrong length was passed."""


class InputError(HabfError, ValueError):
    """Malformed or inconsistent key/cost input."""


class DomainError(HabfError, ValueError):
    """An analytic evaluator was called outside its domain."""


class UndefinedMetricError(HabfError, ValueError):
    """A metric is undefined for the given input (e.g. zero total cost)."""


class PlanConflictError(HabfError, RuntimeError):
    """An insertion plan no longer matches the HashExpressor cells."""


class FormatError(HabfError, ValueError):
    """A serialized filter is malformed."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class InvariantViolation(HabfError, AssertionError):
    """An internal invariant failed; indicates a bug."""
