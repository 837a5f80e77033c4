"""Exception hierarchy shared by the solver modules."""


class MuskatError(Exception):
    """Base class for all package errors."""


class WindowViolation(MuskatError):
    """A profile is neither decayed at the window edge nor a resolved periodic signal."""


class InterfaceCollision(MuskatError):
    """The two interfaces touch or cross (gap <= 0)."""


class InvertibilityFailure(MuskatError):
    """The density equation could not be solved reliably.

    ``radius`` carries the Neumann-radius estimate when one was computed.
    """

    def __init__(self, message, cond=None, radius=None):
        super().__init__(message)
        self.cond = cond
        self.radius = radius


class FieldEvaluationRefused(MuskatError):
    """Direct field evaluation requested inside the near-interface exclusion zone."""


class RegionMismatch(MuskatError):
    """A point was passed with a region tag that does not contain it."""


class ConfigError(MuskatError):
    """Invalid run configuration; ``field`` names the offending key."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field
