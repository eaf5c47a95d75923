"""Exception types shared across the package."""


class MixglmError(Exception):
    """Base class for all package-specific failures."""


class DimensionMismatchError(MixglmError, ValueError):
    """Operands have incompatible shapes; the message names the offending dims."""


class IllConditionedSliceError(MixglmError):
    """No usable whitening slice was found within the retry budget."""


class DeadPointError(MixglmError):
    """Power iteration hit a point with vanishing contraction."""


class UnderRecoveryError(MixglmError):
    """Fewer components than requested were recovered.

    Carries the partial result so callers can inspect or serialize it.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class SingularTransformError(MixglmError):
    """Coordinate map derivative vanished at an evaluation point."""


class QuadratureError(MixglmError):
    """Gauss-Hermite quadrature failed to converge within the order budget."""


class ComponentCollapseWarning(UserWarning):
    """An EM component lost essentially all responsibility mass."""
