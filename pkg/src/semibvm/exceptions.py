"""Exception types raised by the numerical and sampling layers."""


class SemibvmError(Exception):
    """Base class for all package-specific errors."""


class ImpreciseIntegrationError(SemibvmError):
    """Two quadrature refinement levels disagree beyond tolerance."""


class DivergenceInfiniteError(SemibvmError):
    """KL-type divergence is infinite (q vanishes on a p-positive set)."""


class OutOfSupportError(SemibvmError):
    """A residual or response falls outside a density's support."""


class SingularDesignError(SemibvmError):
    """Design matrix is (numerically) rank deficient."""


class SingularInformationError(SemibvmError):
    """Information matrix cannot be inverted."""


class InsufficientMcSizeError(SemibvmError):
    """Monte Carlo variance exceeds the requested accuracy threshold."""


class UnreliableChainError(SemibvmError):
    """Posterior chain fails a basic reliability check (e.g. low ESS)."""


class NumericalFailureError(SemibvmError):
    """A sampler or optimizer produced non-finite values."""


class OptimizerFailureError(SemibvmError):
    """An optimizer did not converge within its iteration budget."""


class ConfigError(SemibvmError):
    """Invalid experiment or sampler configuration."""
