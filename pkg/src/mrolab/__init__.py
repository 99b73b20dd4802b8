"""Desk-scale laboratory for handover mobility robustness optimization."""

__version__ = "0.1.0"
