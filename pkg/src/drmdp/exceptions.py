"""Exception hierarchy shared by the solver modules and the CLI."""


class DrmdpError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(DrmdpError, ValueError):
    """Malformed instance, kernel, policy or ambiguity model."""

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations or [])


class DimensionError(ValidationError):
    """Array shapes disagree with the instance they are attached to."""


class CostStructureError(ValidationError):
    """Factor-based kernel sets used with costs that depend on the next state."""


class CostAggregationError(ValidationError):
    """Noise outcomes with the same transition carry different costs."""


class EnumerationCapError(DrmdpError):
    """A brute-force enumeration would exceed its configured cap."""

    def __init__(self, what, count, cap):
        super().__init__(f"{what}: {count} combinations exceed the cap of {cap}")
        self.what = what
        self.count = count
        self.cap = cap


class NumericalError(DrmdpError, ArithmeticError):
    """The LP engine could not produce a trustworthy answer."""


class DegenerateError(NumericalError):
    """Pivoting broke down (tiny pivots, cycling or loss of feasibility)."""
