"""Air-hockey dynamic difficulty adjustment via fast per-player adaptation."""

__version__ = "0.1.0"
