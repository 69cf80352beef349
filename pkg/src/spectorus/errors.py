"""Exception types shared across the package."""


class SpectorusError(Exception):
    """Base class for all package-specific failures."""


class NonFiniteInput(SpectorusError, ValueError):
    pass


class UnrefinedCurve(SpectorusError, ValueError):
    """Curve sampling too coarse for the requested operation."""


class SampleBudgetExceeded(SpectorusError, RuntimeError):
    """Propagation or refinement would exceed the configured sample cap."""


class SingularDerivative(SpectorusError, ValueError):
    pass


class NewtonFailure(SpectorusError, RuntimeError):
    def __init__(self, branch, message=""):
        self.branch = branch
        super().__init__(f"inverse-branch solve failed on branch {branch!r} {message}")


class ParallelTransportError(SpectorusError, RuntimeError):
    """Transported normal became parallel to the curve tangent."""


class A1Violation(SpectorusError, RuntimeError):
    """Weight-recursion consistency failed across curve overlaps."""

    def __init__(self, k, sample, spread):
        self.k = k
        self.sample = sample
        self.spread = spread
        super().__init__(
            f"alpha recursion inconsistent at level {k}, sample {sample}: spread {spread:.3e}"
        )


class RecursionDepthExceeded(SpectorusError, RuntimeError):
    pass


class LambdaTooLarge(SpectorusError, ValueError):
    """Requested |lambda| outside the certified truncation region."""


class SkippedLengthExceeded(SpectorusError, RuntimeError):
    """Too much of a quadrature curve was rejected by probe screening."""


class ConfigError(SpectorusError, ValueError):
    pass
