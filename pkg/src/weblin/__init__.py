"""Symbolic-numeric tests for linearizability of planar 3-webs."""

__version__ = "0.1.0"
