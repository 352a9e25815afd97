"""Exception hierarchy shared by every module."""


class HNLSError(Exception):
    """Base class for all library errors."""


class InvalidField(HNLSError):
    pass


class InvalidParameter(HNLSError, ValueError):
    pass


class Unsupported(HNLSError):
    pass


class GridMismatch(HNLSError):
    pass


class NonConvergence(HNLSError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class StepRejected(HNLSError):
    pass


class EmptyLedger(HNLSError):
    pass


class InvalidScenario(HNLSError):
    pass


class InvalidConfig(HNLSError):
    pass
