"""Exception types shared across the package."""


class NumericalFailure(RuntimeError):
    """An internal numerical computation produced an unusable result."""


class SingularStep(NumericalFailure):
    """A rational time step is singular at the requested frequency."""
