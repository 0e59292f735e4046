"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A parameter, schedule or config file violates a precondition."""


class SignalError(ValueError):
    """A measured or computed signal is non-finite."""


class DimensionError(ValueError):
    """Array shapes do not match the declared problem dimensions."""


class SimulationFault(RuntimeError):
    """The integrator produced a non-finite state; message carries a dump."""


class DegenerateConstraintError(RuntimeError):
    """The safety constraint has no input direction at the current state."""
