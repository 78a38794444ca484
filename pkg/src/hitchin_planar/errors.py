"""Exception types shared across the package.

Numerical failures raise subclasses of :class:`NumericalError`; invalid
inputs or contract violations raise subclasses of :class:`ValidationError`.
The CLI maps these onto exit codes 2 (validation) and 3 (numerical).
"""


class ValidationError(ValueError):
    """Input violates a documented precondition or invariant."""


class NumericalError(RuntimeError):
    """A numerical procedure failed to reach its stated tolerance."""


# quartic
class NotNormalizable(ValidationError):
    pass


class PathCrossesZero(NumericalError):
    pass


# hitchin_pde
class SupersolutionConstantTooSmall(NumericalError):
    pass


class MaxIterationsExceeded(NumericalError):
    pass


class BoundaryHitsZero(ValidationError):
    pass


class Diverged(NumericalError):
    pass


class NotMonomial(ValidationError):
    pass


# transport
class OutOfChart(ValidationError):
    pass


class UnstableDirection(ValidationError):
    pass


class LeftGrid(NumericalError):
    pass


class PathTooCloseToZero(ValidationError):
    pass


# symspace
class NonPositiveEigenvalue(ValidationError):
    pass


# polygons
class DomainViolation(ValidationError):
    pass


class NumericalDegeneracy(NumericalError):
    pass


class ChartLimitMissing(ValidationError):
    pass


class ClusteringAmbiguous(NumericalError):
    pass


class ZeroVector(ValidationError):
    pass


# rays
class NoDivergence(ValidationError):
    pass


# cli / pipeline
class MissingStage(ValidationError):
    pass


class StageError(RuntimeError):
    """Wraps a failure with the identity of the pipeline stage that raised it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
