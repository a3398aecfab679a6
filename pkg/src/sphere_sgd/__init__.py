"""Online SGD on the high-dimensional sphere for single-index estimation problems."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

from .dynamics import (  # noqa: E402
    FixedCorrelation,
    SGDConfig,
    Trajectory,
    UniformUpperHalf,
    run_online_sgd,
    run_population_dynamics,
    sgd_step,
)
from .hermite import (  # noqa: E402
    NoExponentError,
    PopulationProfile,
    hermite_coefficients,
    hermite_profile,
    information_exponent,
)
from .models import build_model  # noqa: E402
from .sphere import UnitVector, correlation  # noqa: E402

__all__ = [
    "FixedCorrelation",
    "NoExponentError",
    "PopulationProfile",
    "SGDConfig",
    "Trajectory",
    "UniformUpperHalf",
    "UnitVector",
    "__version__",
    "build_model",
    "correlation",
    "hermite_coefficients",
    "hermite_profile",
    "information_exponent",
    "run_online_sgd",
    "run_population_dynamics",
    "sgd_step",
]
