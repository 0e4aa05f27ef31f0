"""Exception types raised by the simulator."""


class InvalidArgument(ValueError):
    """A parameter violates an operation's precondition."""


class OutOfWindowError(ValueError):
    """A history lookup fell outside the stored window (never extrapolated)."""


class Unsupported(ValueError):
    """The requested check or bound does not apply to this configuration."""


class DivergenceError(RuntimeError):
    def __init__(self, t: float, message: str = "non-finite state"):
        super().__init__(f"{message} at t={t:.17g}")
        self.t = t


class ConvergenceError(RuntimeError):
    """A fixed-point iteration exceeded its iteration cap."""
