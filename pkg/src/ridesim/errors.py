"""Exception hierarchy shared across the simulator."""


class RideSimError(Exception):
    pass


class ConfigError(RideSimError, ValueError):
    """Invalid configuration value or unknown key."""


class DomainError(RideSimError, ValueError):
    """An argument lies outside the operation's domain (bad zone id, empty path, ...)."""


class InfeasibleRouteError(DomainError):
    """Route violates pickup-before-dropoff ordering or yields a negative load."""


class NumericError(RideSimError, ArithmeticError):
    """Non-finite value produced inside the Q-network or its loss."""


class InvariantViolation(RideSimError, RuntimeError):
    """Simulation state broke a module invariant; the run halts."""
