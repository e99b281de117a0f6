"""Dual-clustering intermediate training for few-label text classification."""

__version__ = "0.1.0"
