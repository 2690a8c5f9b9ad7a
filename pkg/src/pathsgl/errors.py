"""Exception types shared across the package."""

from __future__ import annotations


class PathsglError(Exception):
    """Base class for package errors."""


class MissingValueError(PathsglError):
    """A genotype cell is empty or not one of the allowed allele counts."""


class DuplicateIdError(PathsglError):
    """Duplicate sample, feature, or list identifier."""


class RaggedRowError(PathsglError):
    """A delimited row has the wrong number of fields."""


class SampleMismatchError(PathsglError):
    """Genotype and phenotype sample sets differ."""


class InvalidTopologyError(PathsglError):
    """A synthetic pathway layout is internally inconsistent."""


class AlphaZeroError(PathsglError):
    """Operation undefined at alpha = 0 (no lasso component)."""


class NonConvergenceError(PathsglError):
    """Iteration limit reached before the convergence test was met.

    Carries the last iterate so callers can decide whether to keep it.
    """

    def __init__(self, message: str, last_iterate=None, iterations: int = 0, diagnostics=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.iterations = iterations
        self.diagnostics = diagnostics or {}


class DegenerateVarianceError(PathsglError):
    """A correlation was requested for a constant vector."""


class UniverseMismatchError(PathsglError):
    """Two rank arrays do not share the same variable universe."""


class ZeroExpectationError(PathsglError):
    """Normalization by an expected distance that is zero."""


class OutOfRangeError(PathsglError):
    """A numeric argument fell outside its valid range."""


class PValueRangeError(OutOfRangeError):
    """A p-value fell outside [0, 1]."""


class EmptyTruthError(PathsglError):
    """Power is undefined for an empty true-positive set."""


class ZeroMafSumError(PathsglError):
    """Effect size is undefined when causal allele frequencies sum to zero."""
