"""Space-time flux reconstruction (ESFR/NSFR) for 1D+1 conservation laws."""

__version__ = "0.1.0"

from stfr.errors import AdmissibilityError, ConfigurationError, NonconvergenceError, StabilityError  # noqa: E402
from stfr.estimator import SpaceTimeFRSolver  # noqa: E402

__all__ = [
    "AdmissibilityError",
    "ConfigurationError",
    "NonconvergenceError",
    "SpaceTimeFRSolver",
    "StabilityError",
    "__version__",
]
