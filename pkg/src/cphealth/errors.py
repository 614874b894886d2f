"""Exception and warning types raised across the toolkit."""


class CPHError(Exception):
    """Base class for all toolkit errors."""


class ShapeMismatch(CPHError, ValueError):
    pass


class UnknownDisease(CPHError, KeyError):
    pass


class InvalidCoordinate(CPHError, ValueError):
    pass


class InsufficientRegions(CPHError, ValueError):
    pass


class PairShapeError(CPHError, ValueError):
    pass


class DegenerateSeries(CPHError, ValueError):
    """Pearson distance requested on a constant vector."""


class EmptyAnalysis(CPHError, ValueError):
    pass


class InvalidConfig(CPHError, ValueError):
    pass


class InvalidInput(CPHError, ValueError):
    pass


class DivergenceError(CPHError, RuntimeError):
    pass


class InvalidProportion(CPHError, ValueError):
    pass


class SelectionDegenerate(CPHError, ValueError):
    pass


class CommitteeTooSmall(CPHError, ValueError):
    pass


class InsufficientHistory(CPHError, ValueError):
    pass


class IngestError(CPHError, ValueError):
    """Malformed input file. ``line`` is 1-based and includes the header."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class ConvergenceWarning(UserWarning):
    pass


class DegenerateSynthetic(UserWarning):
    pass
