"""Exception hierarchy shared by every subsystem."""


class PommerError(Exception):
    pass


class UsageError(PommerError, ValueError):
    """Caller violated a precondition (terminal step, dead agent, shape mismatch)."""


class GenerationError(PommerError):
    """Board generation cannot satisfy the requested configuration."""


class NumericError(PommerError, ArithmeticError):
    """A non-finite value appeared in a network forward pass or loss."""
