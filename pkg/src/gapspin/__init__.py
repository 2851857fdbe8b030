"""Simulator and verification toolkit for a hollow rigid body holding a rigid
ball, with the gap between them filled by a viscous liquid."""

__version__ = "0.1.0"
