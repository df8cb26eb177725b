"""Feasibility-preserving inexact interior point solver for convex QPs."""

__version__ = "0.1.0"
