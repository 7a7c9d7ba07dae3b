"""Pre/post-selection QKD simulator and analysis backend."""

__version__ = "1.0.0"
