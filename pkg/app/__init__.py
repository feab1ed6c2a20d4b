"""Synthetic-control learners for heterogeneous treatment effects on panel data."""

__version__ = "0.1.0"
