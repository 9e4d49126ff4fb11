"""
Conditional-random-field energy and gradient updates on the lattice.

Pairwise terms couple lattice neighbors through a compatibility matrix w and
a Gaussian feature affinity. The update is plain gradient descent on the
energy, so beliefs are unbounded unless softmax projection is switched on.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy.special import softmax

from lattice_relax.lattice import lattice_mask, neighbor_values
from lattice_relax.types import (
    DIRECTIONS,
    BeliefMap,
    ComponentGraph,
    Image,
    InvalidInputError,
    RunTrajectory,
    check_same_lattice,
)

logger = logging.getLogger(__name__)

Features = Union[Image, np.ndarray]


@dataclass(frozen=True)
class CompatibilityWeights:
    """L x L label compatibility matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise InvalidInputError(f"Compatibility weights must be square, got {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise InvalidInputError("Compatibility weights contain non-finite values")
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def identity(cls, classes: int) -> "CompatibilityWeights":
        return cls(np.eye(classes))


@dataclass(frozen=True)
class CrfConfig:
    alpha: float = 0.1
    project_simplex: bool = False
    T: int = 60

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise InvalidInputError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.T < 0:
            raise InvalidInputError(f"Iteration count must be >= 0, got {self.T}")


def load_weights(path: Union[str, Path]) -> CompatibilityWeights:
    """
    Read a whitespace-separated text matrix.

    Raises:
        InvalidInputError: If the file does not hold a square numeric matrix
    """
    try:
        matrix = np.loadtxt(path, dtype=np.float64, ndmin=2)
    except (OSError, ValueError) as e:
        logger.error(f"Failed to read compatibility weights from {path}: {e}")
        raise InvalidInputError(f"Cannot read weights file {path}: {e}") from e
    return CompatibilityWeights(matrix)


def save_weights(weights: CompatibilityWeights, path: Union[str, Path]) -> None:
    np.savetxt(path, weights.matrix, fmt="%.17g")


def gaussian_kernel(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Probability vector over feature channels, component c proportional to
    exp(-(a_c - b_c)^2).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidInputError(f"Feature vectors differ in length: {a.shape} vs {b.shape}")
    return softmax(-((a - b) ** 2), axis=-1)


def _feature_array(image: Features) -> np.ndarray:
    data = image.data if isinstance(image, Image) else np.asarray(image, dtype=np.float64)
    if data.ndim == 2:
        data = data[..., np.newaxis]
    return data


def affinities(features: np.ndarray) -> np.ndarray:
    """
    Scalar pair affinity s(i, j), the mean of the Gaussian kernel vector,
    for each pixel and direction: shape (..., H, W, 4), zero off-grid.
    """
    in_grid = lattice_mask(features.shape[:-1])
    out = np.zeros(features.shape[:-1] + (4,))
    for d in DIRECTIONS:
        kernel = gaussian_kernel(features, neighbor_values(features, d))
        out[..., d] = np.where(in_grid[..., d], kernel.mean(axis=-1), 0.0)
    return out


def _apply_weights(values: np.ndarray, w: np.ndarray) -> np.ndarray:
    # Explicit class loop keeps the reduction order fixed for every pixel.
    out = np.zeros_like(values)
    for b in range(w.shape[1]):
        out += values[..., b:b + 1] * w[:, b]
    return out


def neighbor_field(values: np.ndarray, pair: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Sum over kept neighbors j of s(i, j) v_j, shape (..., H, W, L)."""
    total = np.zeros_like(values)
    for d in DIRECTIONS:
        kept = edges[..., d]
        total += np.where(kept[..., np.newaxis], pair[..., d:d + 1] * neighbor_values(values, d), 0.0)
    return total


def crf_sweep(values: np.ndarray, pair: np.ndarray, edges: np.ndarray, w: np.ndarray,
              alpha: float, project_simplex: bool = False) -> np.ndarray:
    """
    Synchronous update v_i <- v_i + alpha * sum_j s(i, j) w v_j over a batch.

    Args:
        values (np.ndarray): Beliefs (..., H, W, L)
        pair (np.ndarray): Affinities from `affinities`, (..., H, W, 4)
        edges (np.ndarray): Kept-edge mask (..., H, W, 4)
        w (np.ndarray): L x L compatibility matrix
        alpha (float): Step size
        project_simplex (bool): Softmax-renormalize each updated vector
    """
    updated = values + alpha * _apply_weights(neighbor_field(values, pair, edges), w)
    if project_simplex:
        updated = softmax(updated, axis=-1)
    return updated


def crf_energy(map: BeliefMap, image: Features, w: CompatibilityWeights,
               graph: Optional[ComponentGraph] = None) -> float:
    """
    Pairwise CRF energy over lattice neighbors.

    E = -1/2 sum_i sum_{j in N(i)} s(i, j) v_i^T w v_j, so each lattice edge is
    counted once and the update rule is exactly its negative gradient for
    symmetric w.

    Args:
        map (BeliefMap): Beliefs
        image (Image or np.ndarray): Per-pixel features (H, W, C)
        w (CompatibilityWeights): L x L compatibility
        graph (ComponentGraph, optional): Neighbor scope; defaults to the full lattice

    Returns:
        float: Energy (not bounded below)
    """
    features, edges = _checked(map, image, w, graph)
    field_ = neighbor_field(map.data, affinities(features), edges)
    return float(-0.5 * (map.data * _apply_weights(field_, w.matrix)).sum())


def _checked(map: BeliefMap, image: Features, w: CompatibilityWeights, graph: Optional[ComponentGraph]):
    features = _feature_array(image)
    if features.shape[:2] != (map.height, map.width):
        raise InvalidInputError(
            f"Features {features.shape[:2]} do not match belief map {map.height}x{map.width}"
        )
    if w.matrix.shape[0] != map.classes:
        raise InvalidInputError(f"Weights are {w.matrix.shape}, belief map has {map.classes} classes")
    if graph is None:
        edges = lattice_mask((map.height, map.width))
    else:
        check_same_lattice(map, graph)
        edges = graph.edges
    return features, edges


def crf_step(map: BeliefMap, image: Features, w: CompatibilityWeights, cfg: CrfConfig,
             graph: Optional[ComponentGraph] = None) -> BeliefMap:
    """One synchronous CRF gradient step from the pre-sweep snapshot."""
    features, edges = _checked(map, image, w, graph)
    updated = crf_sweep(map.data, affinities(features), edges, w.matrix, cfg.alpha, cfg.project_simplex)
    return BeliefMap(updated, simplex=cfg.project_simplex)


def run_crf(map: BeliefMap, image: Features, w: CompatibilityWeights, graph: Optional[ComponentGraph],
            cfg: CrfConfig, keep_snapshots: bool = False) -> RunTrajectory:
    """Iterate crf_step cfg.T times, recording crf_energy after each step."""
    energies = [crf_energy(map, image, w, graph)]
    snapshots = [map] if keep_snapshots else None
    for _ in range(cfg.T):
        map = crf_step(map, image, w, cfg, graph)
        energies.append(crf_energy(map, image, w, graph))
        if keep_snapshots:
            snapshots.append(map)
    logger.debug(f"CRF ran {cfg.T} steps, energy {energies[0]:.6g} -> {energies[-1]:.6g}")
    return RunTrajectory(energies=energies, final=map, snapshots=snapshots)
