"""Exception types raised across the package.

Every error derives from :class:`MetaAnalysisError`, itself a ``ValueError``,
so callers that only care about "bad input" can catch one thing.
"""


class MetaAnalysisError(ValueError):
    pass


# dataset validation
class EmptyDataset(MetaAnalysisError):
    pass


class NonPositiveVariance(MetaAnalysisError):
    pass


class DuplicateLabel(MetaAnalysisError):
    pass


class InvalidBounds(MetaAnalysisError):
    pass


class TooFewStudies(MetaAnalysisError):
    pass


# weight problem
class AssumptionViolated(MetaAnalysisError):
    pass


class NonInteriorSolution(MetaAnalysisError):
    pass


class SingularMatrix(MetaAnalysisError):
    pass


class SolverDiverged(MetaAnalysisError):
    pass


# simulation
class InvalidAxis(MetaAnalysisError):
    pass


# input / output
class ParseError(MetaAnalysisError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class MixedSpecification(ParseError):
    pass


class NonPositiveRatio(ParseError):
    pass


class UnsupportedFormat(MetaAnalysisError):
    pass
