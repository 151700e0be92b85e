"""Exception types shared across the package."""


class WlabError(Exception):
    pass


class ValidationError(WlabError, ValueError):
    """Bad input: invalid parameter, scenario field, shift or window."""


class StepError(WlabError):
    """Failure inside a time step. ``step_index`` and ``t`` are filled in by ``simulate``."""

    def __init__(self, message, *, step_index=None, t=None, value=None):
        super().__init__(message)
        self.step_index = step_index
        self.t = t
        self.value = value


class DegeneracyError(StepError):
    """The mass factor 1 - 2ku dropped to or below the configured floor."""


class NonconvergenceError(StepError):
    """Picard or the inner linear solver hit its iteration cap."""
