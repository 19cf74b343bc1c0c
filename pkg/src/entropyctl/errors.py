class InvalidStateError(ValueError):
    """Matrix is not a valid density matrix (or not Hermitian where required)."""


class NumericalConsistencyError(ArithmeticError):
    """A quantity that must be real came out with a large imaginary part."""


class IntegrationError(RuntimeError):
    """Forward integration left the state space."""

    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step
