"""Exception types shared across the package.

The CLI maps these onto exit codes: user-input problems (bad parameters, bad
config, bad data) exit 2, internal invariant violations exit 3.
"""


class KinexError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(KinexError):
    """A model or fit parameter is outside its documented domain."""


class InvalidPopulationError(KinexError):
    """A population cannot be built or used as requested."""


class ConfigError(KinexError):
    """An experiment config file is unreadable or violates the schema."""


class InvalidDataError(KinexError):
    """Input samples violate a fit's preconditions (e.g. non-positive values)."""


class InsufficientDataError(KinexError):
    """Too few usable samples for the requested estimate."""


class UndefinedGiniError(KinexError):
    """Lorenz/Gini is undefined (total is zero)."""


class NoClearingError(KinexError):
    """No positive market-clearing price exists for the current state."""


class InternalInvariantError(KinexError):
    """A conservation or bound invariant failed during a run.

    Carries enough context to reproduce: step index and a state digest.
    """

    def __init__(self, message: str, step: int | None = None, detail: dict | None = None):
        super().__init__(message)
        self.step = step
        self.detail = detail or {}
