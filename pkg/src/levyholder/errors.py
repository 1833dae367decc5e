"""Exception hierarchy shared by all modules."""


class LevyHolderError(Exception):
    """Base class; carries the stage/operation that raised, when known."""

    def __init__(self, message, *, stage=None, operation=None):
        super().__init__(message)
        self.stage = stage
        self.operation = operation

    def __str__(self):
        msg = super().__str__()
        where = "/".join(p for p in (self.stage, self.operation) if p)
        return f"[{where}] {msg}" if where else msg


class ConfigError(LevyHolderError, ValueError):
    pass


class PreconditionError(LevyHolderError):
    pass


class IndeterminateError(LevyHolderError):
    pass


class IntegrationError(LevyHolderError):
    def __init__(self, message, *, partial=None, **kw):
        super().__init__(message, **kw)
        self.partial = partial


class PanelFailureError(IntegrationError):
    def __init__(self, message, *, panel=None, bounds=None, **kw):
        super().__init__(message, **kw)
        self.panel = panel
        self.bounds = bounds


class StepSizeError(LevyHolderError, ValueError):
    pass


class DegenerateTableError(LevyHolderError, ValueError):
    pass
