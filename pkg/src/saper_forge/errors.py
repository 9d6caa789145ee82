"""Exception hierarchy shared by the pipeline."""


class SaperForgeError(Exception):
    """Base class for all pipeline errors."""


class PointOnCenter(SaperForgeError):
    """Raised when a form is requested at a point where the generators all vanish."""


class BoundExceeded(SaperForgeError):
    """The direct-image scan hit its exponent bound."""


class IrrationalCenter(SaperForgeError):
    def __init__(self, message, poly=None):
        super().__init__(message)
        self.poly = poly


class StepCapExceeded(SaperForgeError):
    pass


class NonMonomialTower(SaperForgeError):
    """A chart map is not monomial, so exact monomial direct images do not apply."""


class NoFixedPoint(SaperForgeError):
    pass


class EmptyTree(SaperForgeError):
    pass


class VerificationFailed(SaperForgeError):
    def __init__(self, clause, message):
        super().__init__(f"clause ({clause}) failed: {message}")
        self.clause = clause


class FNotBelowOne(SaperForgeError):
    pass


class ScanFailed(SaperForgeError):
    pass


class OutsideCover(SaperForgeError):
    pass


class QuadratureUnstable(SaperForgeError):
    pass


class ParseError(SaperForgeError, ValueError):
    pass
