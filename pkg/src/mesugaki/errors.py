"""Semantic exception hierarchy shared across the package."""


class MesugakiError(Exception):
    """Base class for all package-specific errors."""


class DomainError(MesugakiError, ValueError):
    """A precondition on arguments was violated (bad horizon, bad rate, ...)."""


class ContractViolationError(MesugakiError, RuntimeError):
    """A declared model contract failed at runtime.

    Raised when a custom intensity rule returns a negative value, when a
    dominating rate is exceeded during thinning, or when internal coupling
    bookkeeping is inconsistent.
    """


class RunawayProcessError(MesugakiError, RuntimeError):
    """Simulation exceeded the accepted-event cap (unstable configuration)."""


class UnsupportedModelError(MesugakiError, RuntimeError):
    """The requested operation is not available for this model.

    Covers custom intensities without a declared local bound and direct
    simulation of measures with non-finite total rate (truncate the small-jump
    window first).
    """


class IntegrabilityError(MesugakiError, RuntimeError):
    """An inner mark integral diverged or failed to converge to tolerance."""


class ConfigError(MesugakiError, ValueError):
    """Scenario configuration is malformed (maps to CLI exit code 2)."""
