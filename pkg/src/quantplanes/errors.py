"""Semantic exception hierarchy for quantplanes."""


class QuantPlanesError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(QuantPlanesError, ValueError):
    """A scalar or vector parameter violates its domain constraint."""


class DegenerateDomainError(QuantPlanesError, ValueError):
    """The predictor cloud cannot support a full-dimensional convex domain."""


class InvalidStateError(QuantPlanesError, FloatingPointError):
    """A parameter state produced non-finite intermediates.

    The sampler treats this as a log-likelihood of -inf (automatic
    rejection); callers evaluating states directly see the exception.
    """


class GridMismatchError(QuantPlanesError, ValueError):
    """Coefficient tables and data disagree on grid length or dimension."""


class NumericError(QuantPlanesError, ArithmeticError):
    """A numerical routine (root finder, factorization) failed; the
    message carries bracketing / escalation diagnostics."""


class InitializationError(QuantPlanesError, RuntimeError):
    """The chain could not be started from a finite-likelihood state."""


class ConfigError(QuantPlanesError, ValueError):
    """A run configuration contains unknown keys or invalid values."""


class DataFormatError(QuantPlanesError, ValueError):
    """A CSV or column specification could not be parsed."""
