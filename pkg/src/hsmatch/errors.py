"""Exception hierarchy for hsmatch.

All solver-facing errors derive from HsmError so callers can catch one
base class; ValueError is kept as a secondary base for the input-validation
family so that sloppy call sites using ``except ValueError`` still work.
"""


class HsmError(Exception):
    """Base class for all hsmatch errors."""


class DomainError(HsmError, ValueError):
    """Input outside the mathematical domain of an operation."""


class GeometryError(HsmError, ValueError):
    """Invalid polygon, frame, or point-placement input."""


class EstimationError(HsmError, ValueError):
    """Tail-coefficient fit failed (rank deficiency, too few samples)."""


class QuadratureError(HsmError, RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class AssemblyError(HsmError, ValueError):
    """Inconsistent discretization or mesh data during system assembly."""


class SupportError(AssemblyError):
    """Perturbation (rho != 1 or f != 0) supported outside the polygon."""


class MeshError(HsmError, ValueError):
    """Invalid finite-element mesh (tags, conformity, orientation)."""


class SolveError(HsmError, RuntimeError):
    """Linear solve failed; carries a condition estimate when available."""

    def __init__(self, message, cond_estimate=None):
        super().__init__(message)
        self.cond_estimate = cond_estimate


class UnsupportedOperationError(HsmError, RuntimeError):
    """Operation not defined in the requested regime (e.g. far field at complex k)."""


class ConfigError(HsmError, ValueError):
    """Run configuration failed schema validation."""
