"""Exception hierarchy for the beam laboratory."""


class BeamError(Exception):
    """Base class for all errors raised by :mod:`btbeam`."""


class ValidationError(BeamError, ValueError):
    """A parameter violates its invariant. ``field`` names the offender."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class QTooSmall(ValidationError):
    pass


class NegativeCoefficient(ValidationError):
    pass


class BadGrid(ValidationError):
    pass


class BadTime(ValidationError):
    pass


class FileMismatch(BeamError):
    pass


class BadMode(BeamError, ValueError):
    pass


class ConvergenceFailure(BeamError, RuntimeError):
    pass


class LengthMismatch(BeamError, ValueError):
    pass


class NonFiniteState(BeamError, FloatingPointError):
    pass


class BallViolation(BeamError, ValueError):
    pass


class IdenticalStates(BeamError, ValueError):
    pass


class SubstepDiverged(BeamError, RuntimeError):
    pass


class EmptyRun(BeamError, ValueError):
    pass


class ZeroDamping(BeamError, ValueError):
    pass


class EmptySequence(BeamError, ValueError):
    pass


class TooShort(BeamError, ValueError):
    pass


class TooSparse(BeamError, ValueError):
    pass


class TooFewSamples(BeamError, ValueError):
    pass


class NonPositiveEnergy(BeamError, ValueError):
    pass


class ParamMismatch(BeamError, ValueError):
    pass


class InsufficientGrids(BeamError, ValueError):
    pass


class ConfigError(BeamError):
    pass


class ParseError(ConfigError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.key = key


class UnknownKey(ParseError):
    pass
