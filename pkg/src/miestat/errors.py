"""Error types shared across the package."""


class ConvergenceError(RuntimeError):
    """A series truncation, quadrature, or root bracket failed to converge."""


class ImpossibleOutcomeError(ValueError):
    """A projective outcome was requested whose Born probability is below tolerance."""
