"""
Error kinds raised by pyhurwitz.

Every numerical failure is a HurwitzError, which is also a ValueError so
callers that only guard against bad values keep working.
"""
from typing import Optional


class HurwitzError(ValueError):
    """Base class for all numerical errors of the package."""


# --- covering ---

class PoleHit(HurwitzError):
    """The rational map was evaluated too close to one of its poles."""


class DegenerateCritical(HurwitzError):
    """A critical point is not simple (R'' vanishes there)."""


class NonGenericCovering(HurwitzError):
    """Coinciding poles, vanishing residues or coinciding branch points."""


class PathThroughBranchPoint(HurwitzError):
    """Fiber continuation passed too close to a critical value."""


class CriticalPointHit(HurwitzError):
    """A uniformizer derivative was requested at a critical point."""


# --- deformation and solvers ---

class CriticalCollision(HurwitzError):
    """Two critical points, or a marked point and a critical point, collided during a flow."""


class StepFailure(HurwitzError):
    """The adaptive step controller gave up."""


class NewtonDivergence(HurwitzError):
    def __init__(self, message: str, iterations: int = 0, residual_norm: Optional[float] = None):
        super().__init__(message)
        self.iterations = iterations
        self.residual_norm = residual_norm


class JacobianSingular(HurwitzError):
    """The Newton Jacobian could not be inverted."""


# --- contour integrals ---

class QuadratureDegraded(HurwitzError):
    """A singularity of the integrand sits too close to the contour nodes."""


class OnContour(HurwitzError):
    """A Cauchy integral was evaluated on its own contour."""


# --- isomonodromy ---

class PoleCollision(HurwitzError):
    """Two Fuchsian poles z_j coincide, or one hits the normalization point."""


class AnchorAtBranchPoint(HurwitzError):
    """A critical point coincides with a Fuchsian pole."""


class LoopThroughPole(HurwitzError):
    """A monodromy loop or its connecting leg passes through a pole."""


class ResonantSpectrum(HurwitzError):
    """Eigenvalues of a residue matrix differ by a nonzero integer."""


# --- hydro ---

class ZeroDenominator(HurwitzError):
    """A normalizing moment vanishes, so speeds are undefined."""


class GradientCatastrophe(HurwitzError):
    def __init__(self, message: str, smallest_singular_value: float = 0.0):
        super().__init__(message)
        self.smallest_singular_value = smallest_singular_value


# --- configuration ---

class ConfigParse(HurwitzError):
    """An input document is malformed or does not match the expected schema."""


class BranchAmbiguity(UserWarning):
    """A square-root sign could not be continued; identities are reported up to sign."""
