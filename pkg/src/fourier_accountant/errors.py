"""Exception types raised by the accountant.

Every error carries a short machine-readable ``code`` so the command line
front end can report failures as a single parsable line.
"""


class AccountantError(ValueError):
    code = "ACCOUNTANT_ERROR"


class NonNormalized(AccountantError):
    code = "NON_NORMALIZED"


class NegativeMass(AccountantError):
    code = "NEGATIVE_MASS"


class EmptyPld(AccountantError):
    code = "EMPTY_PLD"


class OutOfWindow(AccountantError):
    code = "OUT_OF_WINDOW"

    def __init__(self, loss, message=None):
        self.loss = loss
        super().__init__(message or f"privacy loss {loss!r} lies outside the grid window")


class BadLength(AccountantError):
    code = "BAD_LENGTH"


class NonRealResult(AccountantError):
    code = "NON_REAL_RESULT"


class GridMismatch(AccountantError):
    code = "GRID_MISMATCH"


class Degenerate(AccountantError):
    code = "DEGENERATE"


class Infeasible(AccountantError):
    code = "INFEASIBLE"


class BadParameter(AccountantError):
    code = "BAD_PARAMETER"


class WindowTooSmall(AccountantError):
    code = "WINDOW_TOO_SMALL"


class HypothesisViolated(AccountantError):
    code = "HYPOTHESIS_VIOLATED"


class TargetUnreachable(AccountantError):
    code = "TARGET_UNREACHABLE"


class ConfigError(AccountantError):
    """Problem with a plan config file; ``code`` is set per instance."""

    code = "CONFIG_INVALID"

    def __init__(self, message, code=None):
        super().__init__(message)
        if code is not None:
            self.code = code
