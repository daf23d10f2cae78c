"""Market simulation and heavy-tail statistics for re-tradable assets."""

__version__ = "0.1.0"
