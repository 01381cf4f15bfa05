"""Deep eigenspace networks for parametric non-selfadjoint Steklov eigenproblems."""

from .errors import DenError, NumericalError, ValidationError

__version__ = "0.1.0"

__all__ = ["DenError", "NumericalError", "ValidationError", "__version__"]
