"""Exception types raised across netflux."""


class NetfluxError(Exception):
    """Base class for every error netflux raises on purpose."""


class ConfigError(NetfluxError):
    """A configuration object or argument is invalid."""


class PreconditionError(NetfluxError):
    """An operation was called outside its declared precondition."""


class SolverError(NetfluxError):
    """The conjugate-gradient iteration failed to reach its tolerance."""

    def __init__(self, message: str, residual: float = float("nan"), iterations: int = 0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class QuadratureError(NetfluxError):
    """A quadrature did not agree with its refinement."""


class CampaignError(NetfluxError):
    """A campaign lost more replicas than its failure budget allows."""
