"""
Self-organizing dynamics.

Classic Kohonen fitting on an M x M lattice, and the segmentation variant in
which every pixel is a node that drifts toward its gated neighbors, either
uniformly or weighted by neuron response.

The sweep kernels (`uniform_sweep`, `response_sweep`) take arrays with any
number of leading batch axes: values (..., H, W, L), edges (..., H, W, 4).
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from lattice_relax.lattice import lattice_mask, neighbor_values, neighbors
from lattice_relax.seeding import stream
from lattice_relax.types import (
    DIRECTIONS,
    BeliefMap,
    ComponentGraph,
    InvalidInputError,
    RunTrajectory,
    check_same_lattice,
)

logger = logging.getLogger(__name__)

NEIGHBORHOOD_NORMALIZER = 5.0  # Fixed 1/5 even where boundary sets are smaller
UNIFORM = "uniform"
RESPONSE = "response"


@dataclass(frozen=True)
class SomLattice:
    """M x M grid of node vectors, shape (M, M, L)."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=np.float64)
        if nodes.ndim != 3 or nodes.shape[0] != nodes.shape[1]:
            raise InvalidInputError(f"SOM nodes must be M x M x L, got {nodes.shape}")
        if not np.all(np.isfinite(nodes)):
            raise InvalidInputError("SOM nodes contain non-finite values")
        object.__setattr__(self, "nodes", nodes)

    @property
    def side(self) -> int:
        return self.nodes.shape[0]


@dataclass(frozen=True)
class SomStepConfig:
    """
    Attributes:
        alpha (float): Step size in (0, 1]
        mode (str): 'uniform' or 'response'
        include_disconnected (bool): Literal reading where cut neighbors still
            weigh exp(0) in the response-weighted update
    """

    alpha: float = 0.1
    mode: str = UNIFORM
    include_disconnected: bool = False

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise InvalidInputError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.mode not in (UNIFORM, RESPONSE):
            raise InvalidInputError(f"Unknown SOM mode {self.mode!r}")


# --- classic Kohonen map ---------------------------------------------------

def _best_matching_node(nodes: np.ndarray, x: np.ndarray) -> Tuple[int, int]:
    distances = ((nodes - x) ** 2).sum(axis=-1).ravel()
    # argmin returns the first minimum: ties go to the lowest flattened index.
    return divmod(int(np.argmin(distances)), nodes.shape[1])


def classic_som_fit(points: Sequence[np.ndarray], M: int, alpha: float, iters: int, seed: int) -> SomLattice:
    """
    Fit a Kohonen map by online best-matching-unit updates.

    Args:
        points (Sequence[np.ndarray]): Data vectors of length L
        M (int): Lattice side length
        alpha (float): Learning rate, applied to the winner and its 4-neighbors
        iters (int): Number of single-point updates
        seed (int): Seed for node initialization and point draws

    Returns:
        SomLattice: The fitted lattice

    Raises:
        InvalidInputError: If no points are given or M < 1
    """
    data = np.asarray(points, dtype=np.float64)
    if data.size == 0 or data.ndim != 2:
        raise InvalidInputError("classic_som_fit needs a nonempty list of equal-length vectors")
    if M < 1:
        raise InvalidInputError(f"Lattice side must be >= 1, got {M}")
    rng = stream(seed)
    low, high = data.min(axis=0), data.max(axis=0)
    nodes = rng.uniform(low, high, size=(M, M, data.shape[1]))
    for _ in range(iters):
        x = data[rng.integers(len(data))]
        winner = _best_matching_node(nodes, x)
        for r, c in neighbors(winner, M, M):
            nodes[r, c] += alpha * (x - nodes[r, c])
    return SomLattice(nodes)


def classic_som_energy(lattice: SomLattice, points: Sequence[np.ndarray], normalize: bool = True) -> float:
    """
    Map energy: for each point, (1/5) times the summed squared distance from
    the point to its best-matching node's neighborhood.

    The sum is averaged over data points unless `normalize` is False.
    """
    data = np.asarray(points, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != lattice.nodes.shape[2]:
        raise InvalidInputError(
            f"Points of shape {data.shape} do not match node dimension {lattice.nodes.shape[2]}"
        )
    total = 0.0
    for y in data:
        winner = _best_matching_node(lattice.nodes, y)
        hood = [lattice.nodes[r, c] for r, c in neighbors(winner, lattice.side, lattice.side)]
        total += sum(float(((node - y) ** 2).sum()) for node in hood) / NEIGHBORHOOD_NORMALIZER
    if normalize and len(data):
        total /= len(data)
    return total


# --- segmentation dynamics -------------------------------------------------

def neuron_responses(values: np.ndarray) -> np.ndarray:
    """Per-vector response sum_{a,b} 1/2 (v[a] - v[b])^2 over the last axis."""
    values = np.asarray(values, dtype=np.float64)
    response = np.zeros(values.shape[:-1])
    classes = values.shape[-1]
    for a in range(classes):
        for b in range(a + 1, classes):
            response += (values[..., a] - values[..., b]) ** 2
    return response


def neuron_response(v: np.ndarray) -> float:
    """Response of a single belief vector; 0 for uniform, large for peaked."""
    return float(neuron_responses(np.asarray(v, dtype=np.float64)))


def energy_terms(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """
    Per-pixel energy contributions (..., H, W).

    Each pixel contributes 1/5 of the summed squared distances over all
    unordered pairs in its gated neighbor set (itself plus kept neighbors).
    """
    nbrs = [neighbor_values(values, d) for d in DIRECTIONS]
    terms = np.zeros(values.shape[:-1])
    for d in DIRECTIONS:
        kept = edges[..., d]
        terms += np.where(kept, ((nbrs[d] - values) ** 2).sum(axis=-1), 0.0)
        for e in DIRECTIONS[d + 1:]:
            both = kept & edges[..., e]
            terms += np.where(both, ((nbrs[d] - nbrs[e]) ** 2).sum(axis=-1), 0.0)
    return terms / NEIGHBORHOOD_NORMALIZER


def som_energy(map: BeliefMap, graph: ComponentGraph) -> float:
    """
    Neighborhood-difference energy of a belief map over the gated lattice.

    Args:
        map (BeliefMap): Current beliefs
        graph (ComponentGraph): Gated neighbor graph of the same size

    Returns:
        float: Nonnegative energy, zero when beliefs agree within every neighborhood
    """
    check_same_lattice(map, graph)
    return float(energy_terms(map.data, graph.edges).sum())


def som_local_energy(map: BeliefMap, graph: ComponentGraph, coord: Tuple[int, int]) -> float:
    """Energy term of the single neighborhood centred on `coord`."""
    check_same_lattice(map, graph)
    row, col = coord
    if not (0 <= row < map.height and 0 <= col < map.width):
        raise InvalidInputError(f"Coordinate {coord} outside {map.height}x{map.width} grid")
    return float(energy_terms(map.data, graph.edges)[row, col])


def uniform_sweep(values: np.ndarray, edges: np.ndarray, alpha: float) -> np.ndarray:
    """
    One synchronous sweep: every node moves toward the mean of its gated
    neighborhood (itself included) by a fraction alpha.
    """
    step = np.zeros_like(values)
    count = np.ones(values.shape[:-1])
    for d in DIRECTIONS:
        kept = edges[..., d]
        step += np.where(kept[..., np.newaxis], neighbor_values(values, d) - values, 0.0)
        count += kept
    return values + alpha * step / count[..., np.newaxis]


def response_sweep(values: np.ndarray, edges: np.ndarray, alpha: float, include_disconnected: bool = False) -> np.ndarray:
    """
    One synchronous sweep with softmax weights over neuron responses.

    Node j moves toward neighbor i with weight exp(r_i phi) normalized by
    exp(r_j) plus the sum over its neighbors. Cut neighbors are excluded
    unless `include_disconnected`, in which case they weigh exp(0).
    """
    response = neuron_responses(values)
    in_grid = lattice_mask(values.shape[:-1])
    exponents = []
    for d in DIRECTIONS:
        kept = edges[..., d]
        present = in_grid[..., d] if include_disconnected else kept
        exponent = np.where(kept, neighbor_values(response, d, spatial_axes=(-2, -1)), 0.0)
        exponents.append(np.where(present, exponent, -np.inf))
    # Max subtraction guards the exponentials against overflow.
    shift = response.copy()
    for exponent in exponents:
        shift = np.maximum(shift, exponent)
    weights = [np.exp(exponent - shift) for exponent in exponents]
    normalizer = np.exp(response - shift)
    for weight in weights:
        normalizer += weight
    step = np.zeros_like(values)
    for d, weight in zip(DIRECTIONS, weights):
        present = np.isfinite(exponents[d])
        pull = (weight / normalizer)[..., np.newaxis] * (neighbor_values(values, d) - values)
        step += np.where(present[..., np.newaxis], pull, 0.0)
    return values + alpha * step


def _checked_mode(cfg: SomStepConfig, expected: str) -> None:
    if cfg.mode != expected:
        raise InvalidInputError(f"Step expects mode {expected!r}, config has {cfg.mode!r}")


def som_step_uniform(map: BeliefMap, graph: ComponentGraph, cfg: SomStepConfig) -> BeliefMap:
    """Uniformly averaged gradient step over gated neighbors."""
    _checked_mode(cfg, UNIFORM)
    check_same_lattice(map, graph)
    return BeliefMap(uniform_sweep(map.data, graph.edges, cfg.alpha))


def som_step_response(map: BeliefMap, graph: ComponentGraph, cfg: SomStepConfig) -> BeliefMap:
    """Response-weighted step: confident neighbors pull harder."""
    _checked_mode(cfg, RESPONSE)
    check_same_lattice(map, graph)
    return BeliefMap(response_sweep(map.data, graph.edges, cfg.alpha, cfg.include_disconnected))


def run_som(map: BeliefMap, graph: ComponentGraph, cfg: SomStepConfig, T: int, keep_snapshots: bool = False) -> RunTrajectory:
    """
    Apply the configured step T times, recording the energy after each step.

    Args:
        map (BeliefMap): Initial beliefs
        graph (ComponentGraph): Gated lattice
        cfg (SomStepConfig): Step size and mode
        T (int): Number of steps (>= 0)
        keep_snapshots (bool): Also keep the map after every step

    Returns:
        RunTrajectory: T + 1 energies and the final map
    """
    if T < 0:
        raise InvalidInputError(f"Iteration count must be >= 0, got {T}")
    step = som_step_uniform if cfg.mode == UNIFORM else som_step_response
    energies = [som_energy(map, graph)]
    snapshots = [map] if keep_snapshots else None
    for _ in range(T):
        map = step(map, graph, cfg)
        energies.append(som_energy(map, graph))
        if keep_snapshots:
            snapshots.append(map)
    logger.debug(f"SOM ({cfg.mode}) ran {T} steps, energy {energies[0]:.6g} -> {energies[-1]:.6g}")
    return RunTrajectory(energies=energies, final=map, snapshots=snapshots)
