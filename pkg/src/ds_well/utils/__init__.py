"""
Utility functions for the ds_well package.
"""

from . import rotations, norms

__all__ = ["rotations", "norms"]
