"""Residual-trajectory diffusion planner and synthetic driving benchmark."""

__version__ = "0.1.0"
