"""Exception types shared across the package."""


class PauliLabError(Exception):
    """Base class for all package errors."""


class EvaluationError(PauliLabError):
    """A model or symbol produced a non-finite value.

    Carries the offending phase-space point in ``point`` when known.
    """

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class DivergenceError(PauliLabError):
    """An ODE integration failed (step-size underflow or blow-up)."""


class ContractError(PauliLabError):
    """Inputs violate a documented precondition."""


class SamplerError(PauliLabError):
    """A rejection sampler is misconfigured (acceptance rate below floor)."""


class ResolutionError(PauliLabError):
    """A grid is too coarse for the requested object (strict mode)."""
