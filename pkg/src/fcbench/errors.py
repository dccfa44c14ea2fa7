"""Exception hierarchy shared by every fcbench module."""

from __future__ import annotations


class HarnessError(Exception):
    """Base class for all errors raised by fcbench."""


# dataset
class MissingColumnError(HarnessError):
    pass


class IrregularTimestampsError(HarnessError):
    pass


class EmptyDatasetError(HarnessError):
    pass


class InsufficientLengthError(HarnessError):
    pass


# task
class SchemaError(HarnessError):
    """Malformed benchmark or manifest document.

    ``path`` holds the key path of the offending entry, e.g. ``tasks[2].horizon``.
    """

    def __init__(self, message: str, path: str = ""):
        self.message = message
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class DuplicateTaskNameError(HarnessError):
    pass


class UnknownFrequencyError(HarnessError):
    pass


class NoFeasibleWindowError(HarnessError):
    pass


class WindowCountMismatchError(HarnessError):
    pass


# metrics
class HistoryTooShortError(HarnessError):
    pass


class ZeroScaleError(HarnessError):
    pass


class MissingQuantileError(HarnessError):
    pass


class ZeroDenominatorError(HarnessError):
    pass


class ZeroScaleWarning(UserWarning):
    """Seasonal error of a history came out as exactly zero."""


# aggregate
class BaselineIncompleteError(HarnessError):
    pass


class MissingTaskScoreError(HarnessError):
    pass


class ZeroReferenceError(HarnessError):
    """A reference column of the error matrix contains a zero where a ratio is needed."""


class ZeroBaselineError(ZeroReferenceError):
    pass


class NonConvergenceError(HarnessError):
    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (residual={residual:.3e})")


# cli / submissions
class IncompleteSubmissionError(HarnessError):
    def __init__(self, missing: list[tuple]):
        self.missing = missing
        shown = ", ".join(str(m) for m in missing[:10])
        more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
        super().__init__(f"submission is missing {len(missing)} record(s): {shown}{more}")


class ShapeMismatchError(HarnessError):
    pass
