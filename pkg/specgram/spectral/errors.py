from __future__ import annotations


class SpecgramError(Exception):
    """Base error class for spectral fluctuation computations."""


class ConfigError(SpecgramError):
    """Raised when a run configuration cannot be parsed or validated."""


class ModelValidationError(SpecgramError):
    """Raised when model inputs (matrices, sparsity, entry laws) violate their invariants."""


class ProfileValidationError(ModelValidationError):
    """Raised when a variance profile violates the model bounds."""


class NumericalError(SpecgramError):
    """Base class for failures of a numerical routine on valid inputs."""


class DomainError(NumericalError):
    """Raised when an argument lies outside the domain of a routine."""


class FixedPointError(NumericalError):
    """Raised when a fixed-point iteration does not reach its tolerance."""

    def __init__(self, message: str, residual: float, iterations: int) -> None:
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SingularKernelError(NumericalError):
    """Raised when a kernel denominator or linear-solve pivot vanishes."""

    def __init__(self, message: str, index: int | None = None, label: str = "j") -> None:
        super().__init__(message)
        self.index = index
        self.label = label


class ContourError(NumericalError):
    """Raised when a contour is invalid for the profile or test function."""


class SamplingError(NumericalError):
    """Raised when a sampler produces unusable draws."""


class StabilityError(NumericalError):
    """Raised when a closed-form expression leaves its admissible range."""


class DegenerateVarianceError(NumericalError):
    """Raised when an estimated or predicted variance is not positive."""
