"""Exception hierarchy.

Errors split into two families so the CLI can map them to exit codes:
``DataError`` (bad input data or model setup, exit 2) and ``NumericalError``
(a well-formed request that is numerically undefined, exit 3).
"""


class MCCShapError(Exception):
    """Base class for all package errors."""


class DataError(MCCShapError):
    pass


class NumericalError(MCCShapError):
    pass


class FileUnreadable(DataError):
    pass


class DuplicateColumnName(DataError):
    pass


class NoUsableRows(DataError):
    pass


class TooFewRows(DataError):
    pass


class NonNumericFeature(DataError):
    pass


class UnknownFeature(DataError):
    def __init__(self, name, available):
        self.name = name
        self.available = list(available)
        super().__init__(
            f"unknown feature {name!r}; available: {', '.join(self.available)}"
        )


class NonBinaryTarget(DataError):
    pass


class KTooLarge(DataError):
    pass


class WidthMismatch(DataError):
    pass


class TooManyFeatures(DataError):
    pass


class EmptyCoalition(DataError):
    pass


class InvalidCoalition(DataError):
    pass


class InfeasibleCorrelation(DataError):
    pass


class DegenerateVariance(NumericalError):
    def __init__(self, feature, variance):
        self.feature = feature
        self.variance = variance
        super().__init__(
            f"feature {feature!r} has degenerate variance {variance:.3g}; "
            "adjustment factor is undefined"
        )


class SingularCoalition(NumericalError):
    def __init__(self, coalition, min_pivot, threshold):
        self.coalition = list(coalition)
        self.min_pivot = min_pivot
        self.threshold = threshold
        super().__init__(
            f"coalition {self.coalition} is (near-)linearly dependent: smallest "
            f"pivot {min_pivot:.3g} below threshold {threshold:.3g}; drop one member"
        )


class SingularDesign(NumericalError):
    pass
