"""Uplink throughput and power control for a hybrid satellite and cell-free terrestrial network."""

__version__ = "0.1.0"
CONFIG_SCHEMA_VERSION = "1"

from .kernels import BACKEND  # noqa: E402

__all__ = ["__version__", "CONFIG_SCHEMA_VERSION", "BACKEND"]
