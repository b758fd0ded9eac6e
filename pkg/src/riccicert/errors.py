"""Exception types shared across the package."""


class PreconditionError(ValueError):
    """An operation was invoked on inputs violating its stated preconditions."""


class DomainError(PreconditionError):
    """Evaluation outside a curve's or chart's domain, or at a degenerate point."""


class KinkSideRequired(PreconditionError):
    """Full jet requested at a marked kink without choosing a side."""


class ConditionError(PreconditionError):
    """A synthesized object failed one of its numeric condition checks.

    Carries the full condition report so callers can see which clause failed
    and by how much.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class EvaluationError(RuntimeError):
    """A margin function failed inside a grid scan; carries the coordinates."""

    def __init__(self, message, coords=None):
        super().__init__(message)
        self.coords = coords


class SearchError(RuntimeError):
    """A parameter search exhausted its iteration budget or lost its bracket."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
