"""Exception types raised across the package."""


class DenError(Exception):
    """Base class for all package errors."""


class ValidationError(DenError):
    """Bad user input (configuration, shapes, files)."""


class NumericalError(DenError):
    """A numerical procedure broke down."""


class PointOutsideMesh(ValidationError):
    pass


class DegenerateTriangle(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class CorruptContainer(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class InteriorSingular(NumericalError):
    pass


class SolverNoConverge(NumericalError):
    pass


class ClusterNotSeparable(NumericalError):
    pass


class SingularResolvent(NumericalError):
    pass


class NotDiagonalizable(NumericalError):
    pass


class ReducedPencilSingular(NumericalError):
    pass


class SolveFailed(NumericalError):
    pass


class RankCollapse(NumericalError):
    pass


class NonFiniteLoss(NumericalError):
    pass


class RankDeficientWarning(UserWarning):
    """POD truncation keeps numerically zero singular directions."""
