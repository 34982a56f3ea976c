"""Truncated Möbius sums, their quadratic means and the associated limit constants."""

__version__ = "0.1.0"
