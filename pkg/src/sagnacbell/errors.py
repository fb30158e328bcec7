"""Exception hierarchy shared by the simulator modules."""


class SagnacBellError(Exception):
    """Base class for all domain errors raised by this package."""


class RegistryError(SagnacBellError, KeyError):
    """A mode label or role is unknown, duplicated, or belongs to another registry."""

    def __str__(self):
        # KeyError quotes its argument; keep messages readable
        return str(self.args[0]) if self.args else ""


class PreconditionError(SagnacBellError, ValueError):
    """An argument violates a documented precondition."""


class ConfigurationError(SagnacBellError, ValueError):
    """A circuit or physical configuration has the wrong shape."""


class ConsistencyError(SagnacBellError, AssertionError):
    """Simulation and closed-form results disagree beyond tolerance."""
