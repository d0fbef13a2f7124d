"""Weakly supervised temporal localization of atypical behaviour in
per-token visual feature sequences, with ordinal severity regression."""
from .errors import (
    CheckpointError,
    ConfigurationError,
    ContractError,
    DataError,
    FormatError,
    UndefinedMetricError,
    WtalError,
)

__version__ = "0.1.0"

__all__ = [
    "CheckpointError",
    "ConfigurationError",
    "ContractError",
    "DataError",
    "FormatError",
    "UndefinedMetricError",
    "WtalError",
    "__version__",
]
