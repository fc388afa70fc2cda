"""Exception hierarchy for configuration and numerical aborts."""

from typing import Any, Dict, Optional


class SlgError(Exception):
    """Base class for every error raised by slg_lab."""

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context: Dict[str, Any] = context

    def record(self) -> Dict[str, Any]:
        """Return a JSON-friendly description of the error."""
        return {"error": type(self).__name__, "message": self.message, **self.context}


class ConfigError(SlgError):
    """Invalid or unreadable run configuration."""


class NumericalError(SlgError):
    """A numerical abort; runs stop and keep their partial output.

    The step engine attaches the failing StepReport as ``report``.
    """

    report: Optional[Any] = None


class NoConvergence(NumericalError):
    """Map inversion did not converge."""


class InsideCluster(NumericalError):
    """A point that must lie in the fluid domain maps inside the unit disk."""


class GridTooCoarse(NumericalError):
    """The boundary grid does not resolve the density near the evaluation point."""


class DomainContainsOrigin(NumericalError):
    """The origin is not inside the cluster, so exterior moments are undefined."""


class CoincidentDrivers(NumericalError):
    """Two driving points collided."""


class DriverEscaped(NumericalError):
    """A driving point reached the unit circle."""


class ClockSkew(NumericalError):
    """Auxiliary clocks of the drivers disagree beyond the allowed skew."""


class NonpositiveDt(NumericalError):
    """A time increment was zero or negative."""


class NegativeDensity(NumericalError):
    """The growth density became negative somewhere on the boundary."""


class NewtonDiverged(NumericalError):
    """The per-step conserved-quantity system could not be solved."""


class CuspDetected(NumericalError):
    """A singularity reached the unit circle or the map lost univalence."""


class DriverCollision(NumericalError):
    """A double-point coordinate coincides with a driving point."""


class NoSPoint(NumericalError):
    """No boundary anchor satisfies the extremum and distance conditions."""


class NoFjordDetected(NumericalError):
    """No fjord with parallel-wall geometry was found."""


def error_record(exc: BaseException, step: Optional[int] = None) -> Dict[str, Any]:
    """Describe an exception for the run manifest.

    Args:
        exc: The exception that stopped the run
        step: Index of the step being attempted, if any

    Returns:
        Dictionary with the error class, message and context
    """
    if isinstance(exc, SlgError):
        record = exc.record()
    else:
        record = {"error": type(exc).__name__, "message": str(exc)}
    if step is not None:
        record["step"] = step
    return record
