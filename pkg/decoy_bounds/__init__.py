__all__ = [
    "__version__",
    # Schur polynomials
    "Partition",
    "PrecisionConfig",
    # Model and data
    "ChannelParams",
    "IntensitySet",
    "MeasurementRecord",
    # Bounds
    "BoundsReport",
    "XConfiguration",
    "ZConfiguration",
    "analyze",
    "compute_x",
    "compute_z",
    # Verification and key rate
    "TruncatedLP",
    "lp_extremize",
    "verify_report",
    "key_rate",
    "key_rate_from_bounds",
    # Errors
    "DecoyBoundsError",
]

__version__ = "0.1.0"

from .errors import DecoyBoundsError  # noqa: E402, F401
from .symfunc import Partition, PrecisionConfig  # noqa: E402, F401
from .model import ChannelParams, IntensitySet, MeasurementRecord  # noqa: E402, F401
from .bounds import BoundsReport, XConfiguration, ZConfiguration, analyze, compute_x, compute_z  # noqa: E402, F401
from .oracle import TruncatedLP, lp_extremize, verify_report  # noqa: E402, F401
from .keyrate import key_rate, key_rate_from_bounds  # noqa: E402, F401
