"""
Domain types shared by the lattice, dynamics and experiment modules.

All containers wrap numpy arrays and validate their invariants on
construction, raising InvalidInputError on violation.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

# Lattice directions, in the fixed order every sweep iterates them.
UP, DOWN, LEFT, RIGHT = 0, 1, 2, 3
DIRECTIONS = (UP, DOWN, LEFT, RIGHT)
OFFSETS = {UP: (-1, 0), DOWN: (1, 0), LEFT: (0, -1), RIGHT: (0, 1)}
OPPOSITE = {UP: DOWN, DOWN: UP, LEFT: RIGHT, RIGHT: LEFT}

SIMPLEX_TOLERANCE = 1e-6


class InvalidInputError(ValueError):
    """Raised when an operation receives malformed or inconsistent input."""


def _require_finite(name: str, data: np.ndarray) -> None:
    if not np.all(np.isfinite(data)):
        raise InvalidInputError(f"{name} contains non-finite values")


@dataclass(frozen=True)
class Image:
    """
    Raster image with real-valued intensities.

    Attributes:
        data (np.ndarray): Array of shape (H, W, C); H, W >= 2 and C >= 1
    """

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, :, np.newaxis]
        if data.ndim != 3:
            raise InvalidInputError(f"Image data must be H x W x C, got shape {data.shape}")
        height, width, channels = data.shape
        if height < 2 or width < 2 or channels < 1:
            raise InvalidInputError(f"Image must be at least 2x2 with one channel, got {data.shape}")
        _require_finite("Image", data)
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class BeliefMap:
    """
    Per-pixel class-belief vectors, the state refined by every dynamics.

    Attributes:
        data (np.ndarray): Array of shape (H, W, L)
        simplex (bool): When True every pixel vector is nonnegative and sums to 1
    """

    data: np.ndarray
    simplex: bool = False

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or min(data.shape) < 1:
            raise InvalidInputError(f"BeliefMap data must be H x W x L, got shape {data.shape}")
        _require_finite("BeliefMap", data)
        if self.simplex and not is_simplex(data):
            raise InvalidInputError("BeliefMap flagged simplex but pixel vectors are not distributions")
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def classes(self) -> int:
        return self.data.shape[2]

    def argmax(self) -> np.ndarray:
        """Return the per-pixel label map (ties resolve to the lowest class)."""
        return np.argmax(self.data, axis=-1)


def is_simplex(values: np.ndarray, tolerance: float = SIMPLEX_TOLERANCE) -> bool:
    """Check that every vector along the last axis is a probability distribution."""
    return bool(np.all(values >= -tolerance) and np.all(np.abs(values.sum(axis=-1) - 1.0) <= tolerance))


@dataclass(frozen=True)
class FilterResponse:
    """One real scalar per pixel, e.g. the Laplacian of an image."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise InvalidInputError(f"FilterResponse must be H x W, got shape {data.shape}")
        _require_finite("FilterResponse", data)
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class ComponentGraph:
    """
    4-neighbor lattice after edge dropping.

    Attributes:
        edges (np.ndarray): Boolean array (H, W, 4) indexed by UP, DOWN, LEFT, RIGHT
        labels (np.ndarray): Integer component label per pixel, shape (H, W)
    """

    edges: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=bool)
        labels = np.asarray(self.labels, dtype=np.int64)
        if edges.ndim != 3 or edges.shape[2] != 4:
            raise InvalidInputError(f"Edge mask must be H x W x 4, got shape {edges.shape}")
        if labels.shape != edges.shape[:2]:
            raise InvalidInputError(f"Label shape {labels.shape} does not match edge mask {edges.shape[:2]}")
        # Off-grid directions are never kept.
        if edges[0, :, UP].any() or edges[-1, :, DOWN].any() or edges[:, 0, LEFT].any() or edges[:, -1, RIGHT].any():
            raise InvalidInputError("Edge mask keeps an edge pointing off the grid")
        if not (np.array_equal(edges[1:, :, UP], edges[:-1, :, DOWN])
                and np.array_equal(edges[:, 1:, LEFT], edges[:, :-1, RIGHT])):
            raise InvalidInputError("Edge mask is not symmetric")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "labels", labels)

    @property
    def height(self) -> int:
        return self.edges.shape[0]

    @property
    def width(self) -> int:
        return self.edges.shape[1]

    @property
    def n_components(self) -> int:
        return int(np.unique(self.labels).size)

    def kept_edges(self) -> set:
        """Return the set of kept directed edges as ((r, c), (r2, c2)) pairs."""
        kept = set()
        for row, col, direction in zip(*np.nonzero(self.edges)):
            dy, dx = OFFSETS[int(direction)]
            kept.add(((int(row), int(col)), (int(row) + dy, int(col) + dx)))
        return kept


@dataclass
class RunTrajectory:
    """
    Record of one refinement run.

    `energies` holds T + 1 values: the initial state followed by one per step.
    """

    energies: List[float]
    final: BeliefMap
    snapshots: Optional[List[BeliefMap]] = field(default=None)

    @property
    def iterations(self) -> int:
        return len(self.energies) - 1


def check_same_lattice(belief_map: BeliefMap, graph: ComponentGraph) -> None:
    """Raise InvalidInputError unless map and graph share H x W."""
    if (belief_map.height, belief_map.width) != (graph.height, graph.width):
        raise InvalidInputError(
            f"Belief map {belief_map.height}x{belief_map.width} does not match "
            f"graph {graph.height}x{graph.width}"
        )
