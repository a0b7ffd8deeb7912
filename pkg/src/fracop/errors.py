"""Exception and warning types shared across the package."""


class FracopError(Exception):
    """Base class for computation errors raised by fracop."""


class GridMismatchError(FracopError, ValueError):
    pass


class DomainError(FracopError, ValueError):
    """Evaluation outside the domain of an expression or operator."""

    def __init__(self, message, node_index=None):
        if node_index is not None:
            message = f"{message} (grid node {node_index})"
        super().__init__(message)
        self.node_index = node_index


class ParseError(FracopError, ValueError):
    def __init__(self, message, offset):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class PoleError(FracopError, ValueError):
    """Gamma-function pole at a non-positive integer."""


class DeltaOrderError(FracopError):
    """A result would need a Dirac derivative above the supported order."""


class InverseDoesNotExist(FracopError):
    """s^alpha F(s) grows in a way that has no locally integrable inverse."""


class UnsupportedOperatorError(FracopError):
    pass


class UnsupportedTransformError(FracopError):
    """No closed-form Laplace transform is known for an expression."""


class TruncationError(FracopError):
    """Forward-transform truncation bound could not be met."""


class InversionError(FracopError):
    pass


class InversionWarning(UserWarning):
    """Numerical inversion did not pass its self-consistency check."""


class AccuracyWarning(UserWarning):
    """A scheme ran outside its accuracy assumptions (kinks, singular data)."""


class ConvergenceWarning(UserWarning):
    pass
