"""System identification for shape-underactuated dissipative locomotors."""

__version__ = "0.1.0"
