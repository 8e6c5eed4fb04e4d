"""Sampling-based system identification with active exploration for
articulated rigid bodies with contact."""

__version__ = "0.1.0"
