"""Exception hierarchy.

Everything numerical derives from :class:`NumericalError` so the CLI can map
it to exit code 2; usage and configuration problems derive from
:class:`UsageError` (exit code 1).
"""


class GGCError(Exception):
    """Base class for all package errors."""


class NumericalError(GGCError):
    pass


class UsageError(GGCError):
    pass


class ShapeMismatch(UsageError, ValueError):
    pass


class Unstable(NumericalError):
    def __init__(self, rho, what="model"):
        self.rho = float(rho)
        super().__init__(f"{what} is unstable: companion spectral radius {self.rho:.6g} >= 1")


class UnstableFit(Unstable):
    def __init__(self, rho):
        super().__init__(rho, what="fitted VAR")


class UnstableNullModel(Unstable):
    def __init__(self, rho):
        super().__init__(rho, what="null model")


class NotPositiveDefinite(NumericalError):
    pass


class InsufficientData(NumericalError):
    pass


class SingularRegressors(NumericalError):
    pass


class TruncationCapReached(NumericalError):
    pass


class SingularTransfer(NumericalError):
    pass


class SingularResolvent(NumericalError):
    pass


class NoConvergence(NumericalError):
    def __init__(self, residual, iterations):
        self.residual = float(residual)
        self.iterations = int(iterations)
        super().__init__(f"DARE did not converge after {iterations} iterations (residual {residual:.3g})")


class IndefiniteInnovations(NumericalError):
    pass


class EmptySubset(UsageError, ValueError):
    pass


class DegenerateStep(NumericalError):
    pass


class TooManyFailures(NumericalError):
    pass


class EmptySample(UsageError, ValueError):
    pass


class ParseError(UsageError):
    def __init__(self, msg, line=None):
        self.line = line
        super().__init__(f"{msg} (line {line})" if line is not None else msg)


class SchemaError(UsageError):
    def __init__(self, field, msg):
        self.field = field
        super().__init__(f"{field}: {msg}")
