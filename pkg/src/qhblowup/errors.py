"""Exception hierarchy shared by all modules."""


class BlowupError(Exception):
    """Base class; ``name`` is the module-level error name surfaced by the CLI."""

    @property
    def name(self):
        return type(self).__name__


class DenominatorZero(BlowupError, ZeroDivisionError):
    def __init__(self, index=None, point=None):
        self.index = index
        self.point = point
        super().__init__(f"denominator of component {index} vanishes at {point}")


class NotAsymptoticallyQH(BlowupError):
    pass


class MixedDenominator(BlowupError):
    pass


class OnHorizon(BlowupError):
    pass


class NoConvergence(BlowupError):
    pass


class ResidualTooLarge(BlowupError):
    pass


class SingularNewtonJacobian(BlowupError):
    def __init__(self, point, message="singular Newton Jacobian"):
        self.point = point
        super().__init__(f"{message} at {point}")


class NonPositiveCstar(BlowupError):
    pass


class PairingFailed(BlowupError):
    def __init__(self, failures):
        self.failures = dict(failures)
        super().__init__("; ".join(f"{k}={v:.3e}" for k, v in self.failures.items()))


class GapViolated(BlowupError):
    pass


class StepSizeUnderflow(BlowupError):
    pass


class NotConverging(BlowupError):
    pass


class DegenerateFit(BlowupError):
    pass


class ProblemParseError(BlowupError):
    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        where = f" (line {line}, column {col})" if line is not None else ""
        super().__init__(f"{message}{where}")
