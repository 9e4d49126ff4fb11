"""
Pixel lattice, image filters and the component-gated neighbor graph.

Edges of the 4-neighbor lattice are dropped wherever the filter response
jumps by more than epsilon; the surviving edges confine every dynamics.
"""

import logging
from abc import ABC, abstractmethod
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse import csgraph

from lattice_relax.types import (
    DIRECTIONS,
    DOWN,
    LEFT,
    OFFSETS,
    RIGHT,
    UP,
    ComponentGraph,
    FilterResponse,
    Image,
    InvalidInputError,
)

logger = logging.getLogger(__name__)

LAPLACIAN_STENCIL = np.array(
    [[0.0, 1.0, 0.0],
     [1.0, -4.0, 1.0],
     [0.0, 1.0, 0.0]]
)
KEEP_ALL = float("inf")


class LatticeFilter(ABC):
    """Maps an image (or a stack of grayscale images) to one scalar per pixel."""

    @abstractmethod
    def apply_stack(self, images: np.ndarray) -> np.ndarray:
        """Filter an array (..., H, W) of channel-mean images."""

    def __call__(self, image: Image) -> FilterResponse:
        return FilterResponse(self.apply_stack(image.data.mean(axis=2)))


class LaplacianFilter(LatticeFilter):
    """4-neighbor Laplacian with edge replication at the border."""

    def apply_stack(self, images: np.ndarray) -> np.ndarray:
        images = np.asarray(images, dtype=np.float64)
        # A size-1 kernel on leading axes keeps stacked images independent.
        kernel = LAPLACIAN_STENCIL.reshape((1,) * (images.ndim - 2) + (3, 3))
        return ndimage.convolve(images, kernel, mode="nearest")


def laplacian_filter(image: Image) -> FilterResponse:
    """
    Laplacian of the channel-mean image.

    Args:
        image (Image): Source image, at least 2x2

    Returns:
        FilterResponse: Stencil response (center -4, cross neighbors +1)
    """
    return LaplacianFilter()(image)


def neighbor_values(values: np.ndarray, direction: int, spatial_axes: Tuple[int, int] = (-3, -2)) -> np.ndarray:
    """
    Gather, for every pixel, the value of its neighbor in `direction`.

    Positions whose neighbor is off-grid are filled with zeros; callers mask
    them out with the edge mask.
    """
    dy, dx = OFFSETS[direction]
    out = np.zeros_like(values)
    dst = [slice(None)] * values.ndim
    src = [slice(None)] * values.ndim
    for axis, delta in zip(spatial_axes, (dy, dx)):
        if delta < 0:
            dst[axis], src[axis] = slice(1, None), slice(None, -1)
        elif delta > 0:
            dst[axis], src[axis] = slice(None, -1), slice(1, None)
    out[tuple(dst)] = values[tuple(src)]
    return out


def lattice_mask(shape: Sequence[int]) -> np.ndarray:
    """Edge mask (..., H, W, 4) of the full 4-neighbor lattice."""
    mask = np.ones(tuple(shape) + (4,), dtype=bool)
    mask[..., 0, :, UP] = False
    mask[..., -1, :, DOWN] = False
    mask[..., :, 0, LEFT] = False
    mask[..., :, -1, RIGHT] = False
    return mask


def default_epsilon(response: np.ndarray, scale: float = 0.1) -> float:
    """Scale-invariant threshold: `scale` times the response range."""
    return float(scale * (response.max() - response.min()))


def edge_mask(responses: np.ndarray, epsilon: float) -> np.ndarray:
    """
    Keep edge i->j iff |F_i - F_j| <= epsilon.

    Args:
        responses (np.ndarray): Filter responses (..., H, W)
        epsilon (float): Nonnegative threshold; inf keeps every edge

    Returns:
        np.ndarray: Boolean mask (..., H, W, 4), symmetric by construction
    """
    if epsilon < 0:
        raise InvalidInputError(f"epsilon must be nonnegative, got {epsilon}")
    mask = lattice_mask(responses.shape)
    for direction in DIRECTIONS:
        diff = np.abs(responses - neighbor_values(responses, direction, spatial_axes=(-2, -1)))
        mask[..., direction] &= diff <= epsilon
    return mask


def component_labels(edges: np.ndarray) -> np.ndarray:
    """
    Connected components of the kept-edge graph of one lattice.

    Labels are numbered in order of the lowest row-major pixel of each
    component.
    """
    height, width = edges.shape[:2]
    index = np.arange(height * width).reshape(height, width)
    rows = np.concatenate([index[:, :-1][edges[:, :-1, RIGHT]], index[:-1, :][edges[:-1, :, DOWN]]])
    cols = np.concatenate([index[:, 1:][edges[:, :-1, RIGHT]], index[1:, :][edges[:-1, :, DOWN]]])
    adjacency = sparse.coo_matrix(
        (np.ones(rows.size, dtype=np.int8), (rows, cols)), shape=(height * width, height * width)
    )
    _, labels = csgraph.connected_components(adjacency, directed=False)
    # Renumber by first occurrence so labels do not depend on traversal order.
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inverse].reshape(height, width)


def build_component_graph(fr: FilterResponse, epsilon: Optional[float] = None, scale: float = 0.1) -> ComponentGraph:
    """
    Drop lattice edges across filter-response jumps and label components.

    Args:
        fr (FilterResponse): Per-pixel filter response
        epsilon (float, optional): Threshold; None uses `scale` times the response range
        scale (float): Relative threshold used when epsilon is None

    Returns:
        ComponentGraph: Kept-edge mask and component labels
    """
    if epsilon is None:
        epsilon = default_epsilon(fr.data, scale)
    edges = edge_mask(fr.data, epsilon)
    graph = ComponentGraph(edges=edges, labels=component_labels(edges))
    logger.debug(f"Component graph {fr.height}x{fr.width} at epsilon={epsilon:.4g}: {graph.n_components} components")
    return graph


def full_graph(height: int, width: int) -> ComponentGraph:
    """The ungated 4-neighbor lattice (a single component)."""
    return ComponentGraph(edges=lattice_mask((height, width)), labels=np.zeros((height, width), dtype=np.int64))


def neighbors(coord: Tuple[int, int], height: int, width: int) -> List[Tuple[int, int]]:
    """
    The pixel itself followed by its in-bounds 4-neighbors.

    Raises:
        InvalidInputError: If coord is outside the H x W grid
    """
    row, col = coord
    if not (0 <= row < height and 0 <= col < width):
        raise InvalidInputError(f"Coordinate {coord} outside {height}x{width} grid")
    result = [(row, col)]
    for direction in DIRECTIONS:
        dy, dx = OFFSETS[direction]
        r, c = row + dy, col + dx
        if 0 <= r < height and 0 <= c < width:
            result.append((r, c))
    return result
