"""Compiler and model checker for distributed measurement-based protocols."""

__version__ = "0.1.0"
