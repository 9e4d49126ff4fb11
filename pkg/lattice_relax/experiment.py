"""
Sweep harness.

A sweep is a list of independent cells (noise level or training-set size,
times seed). Each cell builds its test set, corrupts the inputs, initializes
beliefs with the backbone stand-in, and runs the four models side by side,
recording metrics at every iteration checkpoint. Cells own their random
streams, so results do not depend on how many worker processes run them.
"""

import logging
from dataclasses import dataclass
from functools import partial
from multiprocessing import Pool
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.special import softmax

from lattice_relax import seeding
from lattice_relax.config import MODELS, ExperimentConfig, InitConfig, compatibility_matrix
from lattice_relax.crf import affinities, crf_sweep
from lattice_relax.hopfield import (
    MemoryBank,
    PatchSet,
    hopfield_sweep,
    learn_memories,
    patchify_array,
    reconstruction_error,
    unpatchify_array,
)
from lattice_relax.lattice import LaplacianFilter, default_epsilon, edge_mask, lattice_mask
from lattice_relax.metrics_loss import ConfusionCounts, class_iou, confusion, iou, mean_iou, precision_recall
from lattice_relax.shapes_data import NUM_LABELS, NoiseSpec, corrupt, generate_dataset
from lattice_relax.som import response_sweep, uniform_sweep
from lattice_relax.types import BeliefMap, InvalidInputError

logger = logging.getLogger(__name__)

RESULT_COLUMNS = ["model", "noise", "samples", "iteration", "seed", "class", "metric", "value"]
AGGREGATE_CLASS = "all"
NOISE = "noise"
SAMPLES = "samples"


@dataclass(frozen=True)
class Cell:
    """One sweep job: a (noise, training size) point for one seed."""

    index: int
    kind: str
    noise: float
    samples: int
    seed: int


def noise_key(noise: float) -> int:
    """Integer stream key for a noise level (milli-units)."""
    return int(round(noise * 1000))


def init_belief_array(masks: np.ndarray, epsilon: float, params: InitConfig, rng: np.random.Generator,
                      classes: int = NUM_LABELS) -> np.ndarray:
    """
    Backbone stand-in: softmax(a * onehot(label) + N(0, b * epsilon / 100)).

    Args:
        masks (np.ndarray): Integer labels (..., H, W)
        epsilon (float): Input noise level the beliefs should degrade with
        params (InitConfig): Confidence scale a and noise coupling b
        rng (np.random.Generator): Stream for the logit noise
        classes (int): Number of labels L

    Returns:
        np.ndarray: Simplex-valued beliefs (..., H, W, L)
    """
    if params.a < 0 or params.b < 0:
        raise InvalidInputError(f"Initializer needs a >= 0 and b >= 0, got a={params.a}, b={params.b}")
    logits = params.a * np.eye(classes)[np.asarray(masks, dtype=np.int64)]
    logits = logits + rng.normal(0.0, params.b * epsilon / 100.0, size=logits.shape)
    return softmax(logits, axis=-1)


def init_beliefs(mask: np.ndarray, epsilon: float, params: InitConfig, rng: np.random.Generator,
                 classes: int = NUM_LABELS) -> BeliefMap:
    """Initial belief map for one instance."""
    return BeliefMap(init_belief_array(mask, epsilon, params, rng, classes), simplex=True)


def _instance_beliefs(masks: Sequence[np.ndarray], epsilon: float, params: InitConfig,
                      rng: np.random.Generator) -> np.ndarray:
    # Drawn one instance at a time so a dataset prefix gets identical beliefs.
    return np.stack([init_belief_array(mask, epsilon, params, rng) for mask in masks])


def _component_edges(images: np.ndarray, cfg: ExperimentConfig) -> np.ndarray:
    responses = LaplacianFilter().apply_stack(images)
    masks = []
    for response in responses:
        epsilon = cfg.lattice.epsilon
        if epsilon is None:
            epsilon = default_epsilon(response, cfg.lattice.epsilon_scale)
        masks.append(edge_mask(response, epsilon))
    return np.stack(masks)


def _metric_rows(counts: ConfusionCounts, literal: bool) -> List[Tuple[str, str, float]]:
    rows = [(AGGREGATE_CLASS, "iou", iou(counts)), (AGGREGATE_CLASS, "mean_iou", mean_iou(counts))]
    for label in range(counts.classes):
        precision, recall = precision_recall(counts, label, literal=literal)
        rows.append((str(label), "precision", precision))
        rows.append((str(label), "recall", recall))
        rows.append((str(label), "class_iou", class_iou(counts, label)))
    return rows


class CellRunner:
    """Evaluates the four models on one cell."""

    def __init__(self, cfg: ExperimentConfig, cell: Cell):
        self.cfg = cfg
        self.cell = cell
        self.checkpoints = sorted(set(cfg.sweep.checkpoints))
        self.horizon = self.checkpoints[-1]
        self.counts: Dict[Tuple[str, int], ConfusionCounts] = {}
        self.extra_rows: List[Tuple[str, int, str, str, float]] = []
        self.weights = compatibility_matrix(cfg.crf, NUM_LABELS)

    def _record(self, model: str, iteration: int, values: np.ndarray, masks: np.ndarray) -> None:
        counts = confusion(np.argmax(values, axis=-1), masks, NUM_LABELS)
        key = (model, iteration)
        self.counts[key] = self.counts[key] + counts if key in self.counts else counts

    def _test_set(self):
        cfg, cell = self.cfg, self.cell
        test_seed = seeding.derive_seed(cfg.dataset.seed, seeding.TEST_SET, cell.seed)
        instances = generate_dataset(cfg.dataset.n_test, cfg.dataset.height, cfg.dataset.width, test_seed)
        rng = seeding.stream(cfg.dataset.seed, seeding.CORRUPTION, cell.seed, noise_key(cell.noise))
        spec = NoiseSpec(cell.noise)
        images = np.stack([corrupt(inst.image, spec, rng).data[:, :, 0] for inst in instances])
        masks = np.stack([inst.mask for inst in instances])
        belief_rng = seeding.stream(cfg.dataset.seed, seeding.INIT_BELIEFS, cell.seed, noise_key(cell.noise))
        beliefs = _instance_beliefs(masks, cell.noise, cfg.init, belief_rng)
        return images, masks, beliefs

    def _memory_bank(self) -> MemoryBank:
        cfg, cell = self.cfg, self.cell
        train_seed = seeding.derive_seed(cfg.dataset.seed, seeding.TRAIN_SET, cell.seed)
        instances = generate_dataset(cell.samples, cfg.dataset.height, cfg.dataset.width, train_seed)
        rng = seeding.stream(cfg.dataset.seed, seeding.MEMORIES, cell.seed, noise_key(cell.noise))
        beliefs = _instance_beliefs([inst.mask for inst in instances], cell.noise, cfg.init, rng)
        patches = PatchSet(patchify_array(beliefs, cfg.hopfield.patch), cfg.hopfield.patch, NUM_LABELS)
        available = patches.flat().shape[0]
        memories = cfg.hopfield.memories
        if available < memories:
            logger.warning(
                f"Only {available} training tokens for {memories} memories "
                f"(samples={cell.samples}, seed={cell.seed}); clamping"
            )
            memories = available
            self.extra_rows.append(("hopfield", 0, AGGREGATE_CLASS, "warning_memories_clamped", float(memories)))
        kmeans_seed = seeding.derive_seed(cfg.dataset.seed, seeding.MEMORIES, cell.seed, cell.samples)
        return learn_memories([patches], memories, kmeans_seed, beta=cfg.hopfield.beta)

    def _advance(self, model: str, values: np.ndarray, masks: np.ndarray, context: dict) -> None:
        cfg = self.cfg
        height, width = values.shape[-3:-1]
        if model == "identity":
            # The feed-forward stand-in holds its beliefs at every checkpoint.
            for checkpoint in self.checkpoints:
                self._record(model, checkpoint, values, masks)
            return
        if model == "hopfield":
            state = patchify_array(values, cfg.hopfield.patch)
        else:
            state = values
        for step in range(self.horizon + 1):
            if step > 0:
                if model == "som" and cfg.som.mode == "uniform":
                    state = uniform_sweep(state, context["edges"], cfg.som.alpha)
                elif model == "som":
                    state = response_sweep(state, context["edges"], cfg.som.alpha, cfg.som.include_disconnected)
                elif model == "crf":
                    state = crf_sweep(state, context["pair"], context["lattice"], self.weights,
                                      cfg.crf.alpha, cfg.crf.project_simplex)
                elif model == "hopfield":
                    bank = context["bank"]
                    state = hopfield_sweep(state, bank.xi, bank.beta, cfg.hopfield.alpha)
            if step in self.checkpoints:
                if model == "hopfield":
                    snapshot = unpatchify_array(state, cfg.hopfield.patch, NUM_LABELS, height, width)
                else:
                    snapshot = state
                self._record(model, step, snapshot, masks)

    def run(self) -> List[tuple]:
        cfg, cell = self.cfg, self.cell
        images, masks, beliefs = self._test_set()
        bank = self._memory_bank()
        if cell.kind == SAMPLES:
            tokens = patchify_array(beliefs, cfg.hopfield.patch)
            self.extra_rows.append(("hopfield", 0, AGGREGATE_CLASS, "memory_error",
                                    reconstruction_error(tokens, bank)))
        chunk = cfg.sweep.chunk_size
        for start in range(0, len(images), chunk):
            stop = start + chunk
            context = {
                "edges": _component_edges(images[start:stop], cfg),
                "lattice": lattice_mask(images[start:stop].shape),
                "pair": affinities(images[start:stop, :, :, np.newaxis]),
                "bank": bank,
            }
            for model in MODELS:
                self._advance(model, beliefs[start:stop], masks[start:stop], context)
        rows = []
        literal = cfg.sweep.literal_metrics
        for model in MODELS:
            for checkpoint in self.checkpoints:
                for label, metric, value in _metric_rows(self.counts[(model, checkpoint)], literal):
                    rows.append((model, cell.noise, cell.samples, checkpoint, cell.seed, label, metric, value))
        for model, iteration, label, metric, value in self.extra_rows:
            rows.append((model, cell.noise, cell.samples, iteration, cell.seed, label, metric, value))
        logger.info(f"Cell {cell.index} ({cell.kind}: noise={cell.noise:g}, samples={cell.samples}, "
                    f"seed={cell.seed}) done, {len(rows)} rows")
        return rows


def evaluate_cell(cfg: ExperimentConfig, cell: Cell) -> List[tuple]:
    """Run one cell; module-level so worker processes can pickle it."""
    return CellRunner(cfg, cell).run()


def _execute(cfg: ExperimentConfig, cells: List[Cell]) -> pd.DataFrame:
    threads = cfg.sweep.threads
    logger.info(f"Running {len(cells)} cells on {threads} worker(s)")
    if threads > 1:
        with Pool(processes=threads) as pool:
            results = pool.map(partial(evaluate_cell, cfg), cells, chunksize=1)
    else:
        results = [evaluate_cell(cfg, cell) for cell in cells]
    # Pool.map keeps input order, so rows merge in cell-index order either way.
    rows = [row for cell_rows in results for row in cell_rows]
    return pd.DataFrame(rows, columns=RESULT_COLUMNS)


def noise_cells(cfg: ExperimentConfig) -> List[Cell]:
    cells = []
    for noise in cfg.sweep.noise_levels:
        for seed in range(cfg.sweep.seeds):
            cells.append(Cell(len(cells), NOISE, float(noise), cfg.dataset.n_train, seed))
    return cells


def sample_cells(cfg: ExperimentConfig) -> List[Cell]:
    cells = []
    for samples in cfg.sweep.sample_sizes:
        for seed in range(cfg.sweep.seeds):
            cells.append(Cell(len(cells), SAMPLES, float(cfg.sweep.samples_noise), int(samples), seed))
    return cells


def run_noise_sweep(cfg: ExperimentConfig) -> pd.DataFrame:
    """
    Every noise level x seed: corrupt the test inputs, initialize beliefs and
    evaluate all models at each checkpoint.
    """
    return _execute(cfg, noise_cells(cfg))


def run_sample_sweep(cfg: ExperimentConfig) -> pd.DataFrame:
    """
    Every training-set size x seed on a fixed test set. Only the Hopfield
    memories consume training data; SOM and CRF are identical across sizes.
    """
    return _execute(cfg, sample_cells(cfg))


def write_results(rows: pd.DataFrame, path: Union[str, Path]) -> None:
    """Write result rows as UTF-8 CSV with LF endings and 9 significant digits."""
    try:
        rows.to_csv(path, index=False, columns=RESULT_COLUMNS, float_format="%.9g",
                    lineterminator="\n", encoding="utf-8")
        logger.info(f"Data successfully saved to {path}")
        logger.info(f"Total records saved: {len(rows)}")
    except Exception as e:
        logger.error(f"Failed to save results to CSV: {e}")
        raise


def read_results(path: Union[str, Path]) -> pd.DataFrame:
    """Load a result CSV with the class column kept as text."""
    return pd.read_csv(path, dtype={"class": str, "model": str, "metric": str})


def run_sweep(cfg: ExperimentConfig, kind: str, out_dir: Optional[Union[str, Path]] = None) -> pd.DataFrame:
    """Run the named sweep and, if out_dir is given, write `<kind>_sweep.csv` there."""
    if kind == NOISE:
        rows = run_noise_sweep(cfg)
    elif kind == SAMPLES:
        rows = run_sample_sweep(cfg)
    else:
        raise InvalidInputError(f"Unknown sweep kind {kind!r}")
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_results(rows, out / f"{kind}_sweep.csv")
    return rows
