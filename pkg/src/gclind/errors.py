"""Exception hierarchy shared by all gclind modules.

Two broad classes matter for callers: problems with the *inputs*
(``ValidationFailure`` and its friends, CLI exit code 2) and problems that
arise *during* a computation (``NumericalFailure``, CLI exit code 3).
"""

from __future__ import annotations


class GclindError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(GclindError, ValueError):
    """Operator dimensions are inconsistent or exceed the configured maximum."""


class ValidationFailure(GclindError, ValueError):
    """A config, model description, or precondition failed validation.

    ``defects`` lists individual problems as ``(location, message)`` pairs
    when more than one was found.
    """

    def __init__(self, message: str, defects: list[tuple[str, str]] | None = None):
        super().__init__(message)
        self.defects = defects or []


class InvalidDensityError(GclindError, ValueError):
    """A matrix failed the density-operator invariants.

    Carries the full diagnostics record so callers can report every
    violated invariant, not just the first one.
    """

    def __init__(self, message: str, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class EigendecompositionError(GclindError, RuntimeError):
    """An eigendecomposition did not converge; never silently approximated."""


class NumericalFailure(GclindError, RuntimeError):
    """A computation aborted: drift, positivity loss, or solver failure."""


class PropagationError(NumericalFailure):
    """Time integration aborted; carries the last state that passed checks."""

    def __init__(self, message: str, time: float, state, diagnostics=None):
        super().__init__(message)
        self.time = time
        self.state = state
        self.diagnostics = diagnostics


class NullSpaceError(NumericalFailure):
    """No steady state found where trace preservation guarantees one."""
