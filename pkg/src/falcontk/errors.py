"""Exception hierarchy shared by every falcontk module."""


class FalconError(Exception):
    """Base class for all errors raised by falcontk."""


class ShapeError(FalconError, ValueError):
    """Operand extents disagree, or a tensor has the wrong number of ways."""


class GeometryError(ShapeError):
    """A convolution geometry yields an empty (or otherwise invalid) output."""


class RankError(FalconError, ValueError):
    """Requested factorization rank is outside the admissible range."""


class DivergenceError(FalconError, ArithmeticError):
    """Iterative fitting produced a non-finite residual."""

    def __init__(self, iteration, value):
        super().__init__(f"residual became non-finite ({value!r}) at iteration {iteration}")
        self.iteration = iteration
        self.value = value


class CountError(FalconError, ValueError):
    """A counting formula does not evaluate to an exact integer."""


class FormatError(FalconError, ValueError):
    """Malformed FTK tensor file or architecture config."""
