"""Exception types for estimator and baseline failure modes."""


class ToneLlsError(Exception):
    """Base class for all package-specific errors."""


class WindowTooShortError(ToneLlsError, ValueError):
    """Window configuration yields fewer than two samples."""


class DegenerateWindowError(ToneLlsError, ValueError):
    """Window reference matrix is too ill-conditioned to invert reliably."""


class UndefinedPhaseError(ToneLlsError, ArithmeticError):
    """Both quadrature projections vanish; the phase is undefined."""


class SingularDesignError(ToneLlsError, ValueError):
    """Regression design matrix is singular (e.g. all time stamps equal)."""


class InsufficientDataError(ToneLlsError, ValueError):
    """Record does not contain enough complete windows for an estimate."""


class SearchBoundaryError(ToneLlsError, RuntimeError):
    """Grid-search maximum sits on the search boundary; widen the window."""


class ConvergenceError(ToneLlsError, RuntimeError):
    """Iterative refinement did not converge within the iteration budget."""


class TrackingRangeWarning(UserWarning):
    """Estimated frequency offset exceeds the unambiguous unwrap range."""
