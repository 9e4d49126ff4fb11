"""
lattice-relax: energy-based recurrent refinement of segmentation belief maps.

Refinement dynamics run over a pixel lattice. The package also carries the
artificial shapes generator and the sweep/significance harness.
"""

from lattice_relax.types import (
    BeliefMap,
    ComponentGraph,
    FilterResponse,
    Image,
    InvalidInputError,
    RunTrajectory,
)

__version__ = "0.1.0"

__all__ = [
    "BeliefMap",
    "ComponentGraph",
    "FilterResponse",
    "Image",
    "InvalidInputError",
    "RunTrajectory",
]
