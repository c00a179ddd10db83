"""Exception types shared by all homloop modules."""


class HomloopError(Exception):
    """Base class for all homloop errors."""


class DimensionMismatchError(HomloopError, ValueError):
    """Two mode vectors with different window sizes were combined."""


class BinOutOfWindowError(HomloopError, IndexError):
    """A time-bin index lies outside the window of the owning object."""


class DegenerateInputError(HomloopError, ValueError):
    """An operation received an input it cannot meaningfully process
    (e.g. normalizing a near-zero vector)."""


class WindowOverflowError(HomloopError, ValueError):
    """Loop evolution pushed amplitude past the last time bin; the
    scenario must be configured with a larger window."""


class PatternValidationError(HomloopError, ValueError):
    """A switching pattern failed validation; ``diagnostics`` holds the
    individual findings."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


class InfeasibleTargetError(HomloopError, ValueError):
    """A synthesis target cannot be realized under the given loop
    configuration.  ``required_roundtrips`` is set when the failure is a
    depth bound."""

    def __init__(self, message, required_roundtrips=None):
        self.required_roundtrips = required_roundtrips
        super().__init__(message)


class UndefinedCorrelationError(HomloopError, ZeroDivisionError):
    """Normalized correlation requested on a subset where both photons
    are absent (zero denominator)."""


class FitFailureError(HomloopError, RuntimeError):
    """Nonlinear fit did not converge; carries the last iterate."""

    def __init__(self, message, last_params=None, diagnostics=None):
        self.last_params = last_params
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class ScenarioValidationError(HomloopError, ValueError):
    """A scenario failed validation; all findings are aggregated before
    anything is computed."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
