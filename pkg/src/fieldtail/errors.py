"""Shared exception types."""


class DegeneracyError(ArithmeticError):
    """A matrix that must be positive definite (or a variance that must be
    positive) failed its conditioning guard."""


class QuadratureError(ArithmeticError):
    """Adaptive quadrature failed to converge within the refinement budget.

    Carries the last two estimates and the panel count for diagnosis.
    """

    def __init__(self, message, *, last=None, previous=None, panels=None):
        super().__init__(message)
        self.last = last
        self.previous = previous
        self.panels = panels


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""
