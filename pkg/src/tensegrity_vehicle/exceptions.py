"""Error types raised across the toolkit."""


class TensegrityError(Exception):
    """Base class for all toolkit errors."""


class InvalidConfigError(TensegrityError):
    """A builder or run configuration value is out of its allowed range."""


class InfeasibleGeometryError(TensegrityError):
    """A geometric solve (cross-section sizing, enclosure) has no solution."""


class EquilibriumFailureError(TensegrityError):
    """The static pre-stress balance is singular or inconsistent."""


class SingularGeometryError(TensegrityError):
    """Coincident nodes or a degenerate element make force directions undefined."""


class InvalidModelError(TensegrityError):
    """A structure model violates a structural precondition (e.g. zero node mass)."""


class InvalidInputError(TensegrityError):
    """Mismatched or inconsistent inputs to an analysis routine."""


class InvalidGeometryError(TensegrityError):
    """Degenerate face or mesh geometry."""


class InvalidPairError(TensegrityError):
    """The two faces are not neighbors (do not share an edge)."""


class InvalidAttitudeError(TensegrityError):
    """A rotation matrix input is not orthonormal within tolerance."""


class IntegrationFailureError(TensegrityError):
    """The stiff integrator failed to converge or produced non-finite state.

    Carries solver diagnostics and, when available, the last state vector.
    """

    def __init__(self, message, diagnostics=None, state=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
        self.state = state


class SolverError(TensegrityError):
    """A feasibility or optimization solve failed for numerical reasons."""
