"""Exception types raised across the package."""


class ModelError(ValueError):
    """Invalid increment model (bad parameters or nonnegative mean)."""


class ParameterError(ValueError):
    """An argument is outside the admissible range of an operation."""


class DomainError(ValueError):
    """Evaluation point outside the domain where a quantity is defined."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, achieved=None, requested=None):
        super().__init__(message)
        self.achieved = achieved
        self.requested = requested


class CertificationFailed(RuntimeError):
    """A drift inequality was violated on the verification grid.

    ``t`` and ``margin`` locate the worst offending grid point; ``curve``
    holds ``(t, margin)`` arrays for diagnostics when available.
    """

    def __init__(self, message, t=None, margin=None, curve=None):
        super().__init__(message)
        self.t = t
        self.margin = margin
        self.curve = curve


class NoExponentError(ValueError):
    """The moment generating function diverges on every h > 0."""


class NoRootError(RuntimeError):
    """No sign change was found while bracketing a root."""


class ConfigError(ValueError):
    """Experiment configuration rejected before any work was done."""


class DependencyError(RuntimeError):
    """A pipeline artifact needed by a command is missing."""


class StatisticalCheckFailed(RuntimeError):
    """A Monte Carlo consistency check failed beyond its confidence band."""


class SearchFailed(RuntimeError):
    """A grid search found no admissible point below its cap."""

    def __init__(self, message, cap=None):
        super().__init__(message)
        self.cap = cap
