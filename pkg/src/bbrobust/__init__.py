"""Black-box robustness evaluation toolkit."""

__version__ = "0.1.0"
