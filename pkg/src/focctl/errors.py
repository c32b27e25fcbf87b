"""Exception types shared across the toolkit."""


class FocctlError(Exception):
    """Base class for all toolkit errors."""


class DomainError(FocctlError, ValueError):
    """An input violates a documented precondition (bad order, time outside range, ...)."""


class SolverError(FocctlError, RuntimeError):
    """A numerical routine failed (singular step, non-convergent series, lost bracket)."""


class ConfigError(FocctlError, ValueError):
    """A scenario configuration is malformed or inconsistent."""
