"""Microwave-photonic random demodulator simulator with PRBS amplitude compression."""

__version__ = "0.1.0"

from .errors import ConfigError, InvalidArgumentError  # noqa: E402

__all__ = ["ConfigError", "InvalidArgumentError", "__version__"]
