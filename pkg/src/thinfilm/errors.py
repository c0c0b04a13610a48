"""Exception types raised by the solvers."""


class ThinFilmError(Exception):
    """Base class for simulator failures."""


class SingularSystem(ThinFilmError):
    """The implicit linear system could not be solved to tolerance."""


class StepRejected(ThinFilmError):
    """A deterministic step violated the energy or positivity check.

    Carries the rejected candidate so callers can inspect it before halving
    the step size.
    """

    def __init__(self, message, candidate=None, energy_before=None, energy_after=None):
        super().__init__(message)
        self.candidate = candidate
        self.energy_before = energy_before
        self.energy_after = energy_after


class StepSizeUnderflow(ThinFilmError):
    """Adaptive stepping drove ``dt`` below ``dt_min``."""


class NonnegativityViolation(ThinFilmError):
    """A state entry dropped below the admissible negative round-off."""


class QuadratureFailure(ThinFilmError):
    """Adaptive quadrature exhausted its evaluation budget."""


class InsufficientDecayWindow(ThinFilmError):
    """Too few record points with resolvable energy to fit a decay rate."""


class PathFailure(ThinFilmError):
    """A Monte Carlo path failed; ``path_index`` identifies it."""

    def __init__(self, path_index, cause):
        super().__init__(f"path {path_index} failed: {cause!r}")
        self.path_index = path_index
        self.cause = cause


class MassDrift(ThinFilmError):
    """Cumulative relative mass drift of a deterministic run exceeded ``mass_tol``."""
