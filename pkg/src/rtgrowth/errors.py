"""Exception hierarchy for the stability engine."""


class RTGrowthError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(RTGrowthError, ValueError):
    """Invalid physical or geometric parameter."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class RTConditionViolated(ParameterError):
    def __init__(self, message="RT condition violated: rho_plus must exceed rho_minus", field="rho_plus"):
        super().__init__(message, field)


class NonPositiveParameter(ParameterError):
    def __init__(self, field):
        super().__init__(f"parameter {field!r} must be strictly positive", field)


class NegativeCoefficient(ParameterError):
    def __init__(self, field):
        super().__init__(f"coefficient {field!r} must be nonnegative", field)


class ZeroPermeability(ParameterError):
    def __init__(self):
        super().__init__("lambda must be positive for the vertical-field threshold", "lambda")


class VerticalFieldPresent(ParameterError):
    def __init__(self):
        super().__init__("construction requires M_bar[2] == 0", "M_bar")


class ProfileMismatch(RTGrowthError, ValueError):
    pass


class DegreeTooLow(RTGrowthError, ValueError):
    pass


class RankDeficiency(RTGrowthError):
    pass


class IndefiniteDenominator(RTGrowthError):
    pass


class NumericalBreakdown(RTGrowthError):
    pass


class LatticeExhausted(RTGrowthError):
    pass


class NotUnstable(RTGrowthError):
    pass


class ExpansionExhausted(RTGrowthError):
    pass


class ToleranceNotMet(RTGrowthError):
    pass


class StableInput(RTGrowthError, ValueError):
    pass


class NoSignChange(RTGrowthError, ValueError):
    pass


class DenominatorBoundExceeded(RTGrowthError):
    pass


class SingularSystem(RTGrowthError):
    pass


class IncompatibleData(RTGrowthError, ValueError):
    pass
