"""Exception types raised across the package."""


class InvalidArgumentError(ValueError):
    pass


class DegenerateDirectionError(InvalidArgumentError):
    """A sampling direction is (numerically) zero and cannot seed a basis."""


class EmptyBasisError(InvalidArgumentError):
    pass


class UndefinedVarianceError(InvalidArgumentError):
    pass


class UnsupportedModelError(InvalidArgumentError):
    pass


class IncompatibleTableError(InvalidArgumentError):
    """A correction table was trained for a different solver or schedule."""


class DivergenceError(ArithmeticError):
    def __init__(self, message, *, step=None, iteration=None):
        super().__init__(message)
        self.step = step
        self.iteration = iteration
