"""Exception types raised across the package."""


class CilcError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(CilcError, ValueError):
    pass


class SingularPlant(CilcError, ValueError):
    pass


class EmptyCollective(CilcError, ValueError):
    pass


class UnsupportedDimension(CilcError, ValueError):
    pass


class IllPosed(CilcError, ValueError):
    pass


class Uncontrollable(CilcError, ValueError):
    pass


class BadPoleSet(CilcError, ValueError):
    pass


class SequenceTooShort(CilcError, ValueError):
    pass


class NotStronglyConnected(CilcError, ValueError):
    """Raised with a witness pair ``(source, target)`` that has no directed path."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class NumericalBlowup(CilcError, RuntimeError):
    """A simulated trial left the admissible state region.

    ``trial`` is filled in by the trial loops when the blowup happens inside a run.
    """

    def __init__(self, message, sample=None, trial=None):
        super().__init__(message)
        self.sample = sample
        self.trial = trial

    def __str__(self):
        msg = super().__str__()
        if self.trial is not None:
            msg = f"trial {self.trial}: {msg}"
        return msg


class ConfigError(CilcError, ValueError):
    """Invalid scenario configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
