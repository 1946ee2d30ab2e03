"""Exception types raised by the package."""


class EscapeRateError(Exception):
    """Base class for all errors raised by escaperate."""


class WalkError(EscapeRateError, ValueError):
    pass


class MalformedRow(WalkError):
    pass


class UnknownSymbol(WalkError):
    pass


class BoundaryMissing(WalkError):
    """A word of length 0 or 1 was reached but no row describes it."""


class ParseError(EscapeRateError, ValueError):
    pass


class NoConvergence(EscapeRateError, ArithmeticError):
    pass


class SingularSystem(EscapeRateError, ArithmeticError):
    """A linear system is (numerically) singular.

    For the generating-function systems this happens when the walk sits at
    the critical boundary between transience and recurrence.
    """


class NotTransient(EscapeRateError):
    pass


class RowDefect(EscapeRateError, ArithmeticError):
    pass


class NonDeterministicRate(EscapeRateError):
    """The exit chain has several closed classes.

    ``classes`` holds the closed classes as lists of state labels.
    """

    def __init__(self, message, classes=()):
        super().__init__(message)
        self.classes = [list(c) for c in classes]


class AmalgamError(EscapeRateError, ValueError):
    pass


class NotAGroup(AmalgamError):
    pass


class NotAHomomorphism(AmalgamError):
    pass


class BadCosets(AmalgamError):
    pass


class BadWeights(AmalgamError):
    pass


class BadMeasure(AmalgamError):
    pass
