"""
Modern Hopfield patch memory.

The belief map is cut into P x P patches; each flattened patch is a token
that descends the LogSumExp energy, i.e. moves toward a softmax-weighted
mix of stored memories. Tokens never interact.
"""

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Union

import numpy as np
from scipy.special import logsumexp, softmax

from lattice_relax.seeding import stream
from lattice_relax.types import BeliefMap, InvalidInputError, RunTrajectory

logger = logging.getLogger(__name__)

BANK_MAGIC = b"HOPF"
BANK_VERSION = 1
BANK_HEADER = struct.Struct("<4sIIId")
KMEANS_MAX_ITER = 100
KMEANS_TOLERANCE = 1e-6


@dataclass(frozen=True)
class PatchSet:
    """
    Attributes:
        tokens (np.ndarray): (..., H/P, W/P, P*P*L) flattened patches, row-major
            over (row, column, class) inside each patch
        patch (int): Patch side P
        classes (int): Belief channels L
    """

    tokens: np.ndarray
    patch: int
    classes: int

    @property
    def token_length(self) -> int:
        return self.patch * self.patch * self.classes

    def flat(self) -> np.ndarray:
        """All tokens as an (n, I0) matrix."""
        return self.tokens.reshape(-1, self.token_length)


@dataclass(frozen=True)
class MemoryBank:
    """Stored memories xi (I1 x I0) and inverse temperature beta."""

    xi: np.ndarray
    beta: float = 1.0

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=np.float64)
        if xi.ndim != 2 or xi.shape[0] < 1:
            raise InvalidInputError(f"Memory matrix must be I1 x I0 with I1 >= 1, got {xi.shape}")
        if not np.all(np.isfinite(xi)):
            raise InvalidInputError("Memory matrix contains non-finite values")
        if not self.beta > 0:
            raise InvalidInputError(f"beta must be positive, got {self.beta}")
        object.__setattr__(self, "xi", xi)

    @property
    def count(self) -> int:
        return self.xi.shape[0]

    @property
    def token_length(self) -> int:
        return self.xi.shape[1]


def patchify_array(values: np.ndarray, P: int) -> np.ndarray:
    """Zero-pad (..., H, W, L) on bottom/right and cut into (..., H/P, W/P, P*P*L)."""
    if P < 1:
        raise InvalidInputError(f"Patch side must be >= 1, got {P}")
    *lead, height, width, classes = values.shape
    pad_h, pad_w = -height % P, -width % P
    if pad_h or pad_w:
        pad = [(0, 0)] * len(lead) + [(0, pad_h), (0, pad_w), (0, 0)]
        values = np.pad(values, pad)
    gh, gw = (height + pad_h) // P, (width + pad_w) // P
    blocks = values.reshape(*lead, gh, P, gw, P, classes)
    n = len(lead)
    blocks = blocks.transpose(*range(n), n, n + 2, n + 1, n + 3, n + 4)
    return blocks.reshape(*lead, gh, gw, P * P * classes)


def unpatchify_array(tokens: np.ndarray, P: int, classes: int, height: int, width: int) -> np.ndarray:
    """Inverse of patchify_array, cropping the padding."""
    *lead, gh, gw, length = tokens.shape
    if length != P * P * classes:
        raise InvalidInputError(f"Token length {length} != P*P*L = {P * P * classes}")
    if not (gh * P >= height > (gh - 1) * P and gw * P >= width > (gw - 1) * P):
        raise InvalidInputError(f"Patch grid {gh}x{gw} (P={P}) does not cover {height}x{width}")
    n = len(lead)
    blocks = tokens.reshape(*lead, gh, gw, P, P, classes)
    blocks = blocks.transpose(*range(n), n, n + 2, n + 1, n + 3, n + 4)
    values = blocks.reshape(*lead, gh * P, gw * P, classes)
    return values[..., :height, :width, :]


def patchify(map: BeliefMap, P: int) -> PatchSet:
    """Split a belief map into non-overlapping P x P tokens."""
    return PatchSet(tokens=patchify_array(map.data, P), patch=P, classes=map.classes)


def unpatchify(patches: PatchSet, H: int, W: int) -> BeliefMap:
    """Reassemble an H x W belief map from its tokens."""
    return BeliefMap(unpatchify_array(patches.tokens, patches.patch, patches.classes, H, W))


def token_energies(tokens: np.ndarray, xi: np.ndarray, beta: float) -> np.ndarray:
    """-(1/beta) logsumexp(beta xi v) + 1/2 v^T v for every token (..., I0)."""
    return -logsumexp(beta * (tokens @ xi.T), axis=-1) / beta + 0.5 * (tokens ** 2).sum(axis=-1)


def hopfield_energy(token: np.ndarray, bank: MemoryBank) -> float:
    """
    LogSumExp energy of a single token.

    Args:
        token (np.ndarray): State vector of length I0
        bank (MemoryBank): Memories and inverse temperature

    Returns:
        float: Energy; -(1/beta) log I1 for the zero token
    """
    token = np.asarray(token, dtype=np.float64)
    if token.shape != (bank.token_length,):
        raise InvalidInputError(f"Token shape {token.shape} does not match memory length {bank.token_length}")
    return float(token_energies(token, bank.xi, bank.beta))


def retrieve(tokens: np.ndarray, xi: np.ndarray, beta: float) -> np.ndarray:
    """Softmax-weighted memory mix xi^T softmax(beta xi v) per token."""
    return softmax(beta * (tokens @ xi.T), axis=-1) @ xi


def hopfield_sweep(tokens: np.ndarray, xi: np.ndarray, beta: float, alpha: float) -> np.ndarray:
    """One update v <- v + alpha (xi^T softmax(beta xi v) - v) for every token."""
    return tokens + alpha * (retrieve(tokens, xi, beta) - tokens)


def hopfield_step(token: np.ndarray, bank: MemoryBank, alpha: float) -> np.ndarray:
    """Gradient step on hopfield_energy for a single token."""
    if not 0 < alpha <= 1:
        raise InvalidInputError(f"alpha must lie in (0, 1], got {alpha}")
    token = np.asarray(token, dtype=np.float64)
    if token.shape != (bank.token_length,):
        raise InvalidInputError(f"Token shape {token.shape} does not match memory length {bank.token_length}")
    return hopfield_sweep(token, bank.xi, bank.beta, alpha)


def learn_memories(patches: Iterable[PatchSet], I1: int, seed: int, beta: float = 1.0) -> MemoryBank:
    """
    k-means over all training tokens; the centroids become the memories.

    Initial centroids are I1 distinct tokens drawn with the seeded stream.
    Lloyd iterations stop after KMEANS_MAX_ITER rounds or once no centroid
    moves more than KMEANS_TOLERANCE. Empty clusters keep their centroid.

    Raises:
        InvalidInputError: If fewer than I1 tokens are available
    """
    flats = [p.flat() for p in patches]
    if not flats:
        raise InvalidInputError("learn_memories needs at least one patch set")
    data = np.concatenate(flats, axis=0)
    if len(data) < I1 or I1 < 1:
        raise InvalidInputError(f"Cannot learn {I1} memories from {len(data)} tokens")
    rng = stream(seed)
    centroids = data[rng.choice(len(data), size=I1, replace=False)].copy()
    sq_norms = (data ** 2).sum(axis=1)
    for iteration in range(KMEANS_MAX_ITER):
        distances = sq_norms[:, np.newaxis] - 2.0 * data @ centroids.T + (centroids ** 2).sum(axis=1)
        assignment = np.argmin(distances, axis=1)
        counts = np.bincount(assignment, minlength=I1)
        membership = np.zeros((len(data), I1))
        membership[np.arange(len(data)), assignment] = 1.0
        sums = membership.T @ data
        updated = centroids.copy()
        filled = counts > 0
        updated[filled] = sums[filled] / counts[filled, np.newaxis]
        movement = float(np.sqrt(((updated - centroids) ** 2).sum(axis=1)).max())
        centroids = updated
        if movement <= KMEANS_TOLERANCE:
            logger.debug(f"k-means converged after {iteration + 1} iterations")
            break
    logger.info(f"Learned {I1} memories from {len(data)} tokens")
    return MemoryBank(centroids, beta)


def reconstruction_error(tokens: np.ndarray, bank: MemoryBank) -> float:
    """Mean Euclidean distance from each token to its nearest memory."""
    tokens = tokens.reshape(-1, bank.token_length)
    distances = (tokens ** 2).sum(axis=1)[:, np.newaxis] - 2.0 * tokens @ bank.xi.T + (bank.xi ** 2).sum(axis=1)
    return float(np.sqrt(np.maximum(distances.min(axis=1), 0.0)).mean())


def run_hopfield(map: BeliefMap, bank: MemoryBank, alpha: float, T: int, P: int,
                 keep_snapshots: bool = False) -> RunTrajectory:
    """
    Patchify, advance every token T steps, and reassemble.

    The recorded energy is the sum of token energies.
    """
    if not 0 < alpha <= 1:
        raise InvalidInputError(f"Hopfield alpha must lie in (0, 1], got {alpha}")
    if T < 0:
        raise InvalidInputError(f"Iteration count must be >= 0, got {T}")
    patches = patchify(map, P)
    if patches.token_length != bank.token_length:
        raise InvalidInputError(f"Tokens have length {patches.token_length}, memories {bank.token_length}")
    tokens = patches.tokens
    energies = [float(token_energies(tokens, bank.xi, bank.beta).sum())]
    snapshots = [map] if keep_snapshots else None
    for _ in range(T):
        tokens = hopfield_sweep(tokens, bank.xi, bank.beta, alpha)
        energies.append(float(token_energies(tokens, bank.xi, bank.beta).sum()))
        if keep_snapshots:
            snapshots.append(BeliefMap(unpatchify_array(tokens, P, map.classes, map.height, map.width)))
    final = BeliefMap(unpatchify_array(tokens, P, map.classes, map.height, map.width))
    return RunTrajectory(energies=energies, final=final, snapshots=snapshots)


def save_bank(bank: MemoryBank, path: Union[str, Path]) -> None:
    """Write the bank as a little-endian header followed by f64 memories."""
    try:
        with open(path, "wb") as handle:
            handle.write(BANK_HEADER.pack(BANK_MAGIC, BANK_VERSION, bank.count, bank.token_length, bank.beta))
            handle.write(bank.xi.astype("<f8").tobytes(order="C"))
        logger.info(f"Memory bank ({bank.count} x {bank.token_length}) saved to {path}")
    except OSError as e:
        logger.error(f"Failed to save memory bank to {path}: {e}")
        raise


def load_bank(path: Union[str, Path]) -> MemoryBank:
    """
    Read a bank written by save_bank.

    Raises:
        InvalidInputError: On a bad magic, unknown version, or truncated payload
    """
    raw = Path(path).read_bytes()
    if len(raw) < BANK_HEADER.size:
        raise InvalidInputError(f"{path} is too short for a memory bank header")
    magic, version, count, length, beta = BANK_HEADER.unpack_from(raw)
    if magic != BANK_MAGIC or version != BANK_VERSION:
        raise InvalidInputError(f"{path} is not a version {BANK_VERSION} memory bank")
    if (len(raw) - BANK_HEADER.size) % 8:
        raise InvalidInputError(f"{path} payload is not a whole number of f64 values")
    payload = np.frombuffer(raw, dtype="<f8", offset=BANK_HEADER.size)
    if payload.size != count * length:
        raise InvalidInputError(f"{path} holds {payload.size} values, header promises {count * length}")
    return MemoryBank(payload.reshape(count, length).astype(np.float64), beta)
