"""Exception hierarchy shared by every qjd module."""


class QjdError(Exception):
    """Base class for all errors raised by qjd."""


class InvalidInput(QjdError, ValueError):
    """Input that does not satisfy a documented precondition."""


class DimensionMismatch(InvalidInput):
    pass


class NotHermitian(InvalidInput):
    pass


class NotDensityState(InvalidInput):
    pass


class NotUnitary(InvalidInput):
    pass


class IndexOutOfRange(InvalidInput, IndexError):
    pass


class WrongArity(InvalidInput):
    pass


class EmptyAxisSet(InvalidInput):
    pass


class GridMismatch(InvalidInput):
    pass


class UnsupportedKind(InvalidInput):
    pass


class TooLarge(InvalidInput):
    pass


class NotCommuting(InvalidInput):
    """Raised when a family expected to commute does not.

    ``pair`` holds the offending observable indices and ``norm`` the
    Frobenius norm of their commutator.
    """

    def __init__(self, pair: tuple[int, int], norm: float, bound: float):
        self.pair = pair
        self.norm = norm
        self.bound = bound
        super().__init__(
            f"observables {pair[0]} and {pair[1]} do not commute: "
            f"||[A,B]||_F = {norm:.6g} > {bound:.3g}"
        )


class DecompositionFailure(QjdError):
    pass


class DegenerateSample(QjdError):
    pass


class PropertyViolation(QjdError):
    """A constructed distribution broke one of its defining properties."""


class NonnegativityViolation(PropertyViolation):
    def __init__(self, index: int, weight: float):
        self.index = index
        self.weight = weight
        super().__init__(f"weight at grid point {index} is {weight!r}")


class NormalizationViolation(PropertyViolation):
    def __init__(self, total: float):
        self.total = total
        super().__init__(f"weights sum to {total!r}, expected 1")
