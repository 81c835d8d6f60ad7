"""Automatic hypernym-hyponym schema construction and serving toolkit."""

__version__ = "0.1.0"
