"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class NilgeoError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ConfigError(NilgeoError):
    exit_code = 2


class FamilyParseError(NilgeoError):
    """Malformed family document; message carries line or field diagnostics."""

    exit_code = 3

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class DimensionMismatch(NilgeoError, ValueError):
    exit_code = 5


class NotSkewSymmetric(NilgeoError, ValueError):
    exit_code = 3


class DependentPair(NilgeoError):
    """L1, L2 fail the bracket-generating (linear independence) test."""

    exit_code = 5

    def __init__(self, message, xi=None):
        self.xi = None if xi is None else tuple(float(v) for v in xi)
        if xi is not None:
            message = f"{message} at xi={list(self.xi)}"
        super().__init__(message)


class GapTooSmall(NilgeoError):
    """Top two-block invariant subspace not separated from the rest of the spectrum."""

    exit_code = 5


class NoResonance(NilgeoError):
    exit_code = 5


class TripleDetected(NilgeoError):
    exit_code = 5


class ErrTargetUnmet(NilgeoError):
    """Quadrature error estimate above target after the refinement cap."""

    exit_code = 4

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)
