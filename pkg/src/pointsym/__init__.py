"""Discovery of Lie point symmetries from trajectory data."""

__version__ = "0.1.0"
