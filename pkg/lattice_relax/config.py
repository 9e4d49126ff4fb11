"""
Experiment configuration.

Module-level constants are the defaults; ExperimentConfig groups them into
sections that mirror the TOML config file. Every field can be set as
`[section] key = value`; anything else is rejected.
"""

import dataclasses
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from lattice_relax.crf import load_weights

logger = logging.getLogger(__name__)

# Dataset
DATASET_SEED = 0
CANVAS_HEIGHT = 64
CANVAS_WIDTH = 64
TRAIN_SIZE = 80  # Training instances for memory learning outside the sample sweep
TEST_SIZE = 200

# Sweeps
NOISE_LEVELS = (10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0)
SAMPLE_SIZES = (10, 20, 40, 80, 160, 320)
CHECKPOINTS = (0, 20, 40, 60)
SEEDS_PER_CELL = 5
SAMPLES_SWEEP_NOISE = 10.0  # Input noise used while sweeping the training-set size
CHUNK_SIZE = 25  # Test instances advanced together per batched sweep
THREADS = 1

# Lattice
EDGE_EPSILON = None  # None = relative default below
EDGE_EPSILON_SCALE = 0.1  # Fraction of the filter response range

# Dynamics
SOM_ALPHA = 0.1
SOM_MODE = "uniform"  # Options: uniform, response
CRF_ALPHA = 0.1
HOPFIELD_ALPHA = 0.1
PATCH_SIZE = 4
MEMORY_COUNT = 64
HOPFIELD_BETA = 1.0

# Belief initializer (backbone stand-in)
INIT_CONFIDENCE = 4.0
INIT_NOISE_COUPLING = 3.0

# Plotting
MODEL_COLORS = {
    "identity": "#7f7f7f",
    "som": "#1f77b4",
    "crf": "#d62728",
    "hopfield": "#2ca02c",
}
PLOT_METRIC = "mean_iou"  # The aggregate "iou" tops out near 1/L

MODELS = ("identity", "som", "crf", "hopfield")


class ConfigError(ValueError):
    """Raised for unknown or malformed configuration entries."""


@dataclass(frozen=True)
class DatasetConfig:
    seed: int = DATASET_SEED
    height: int = CANVAS_HEIGHT
    width: int = CANVAS_WIDTH
    n_train: int = TRAIN_SIZE
    n_test: int = TEST_SIZE


@dataclass(frozen=True)
class SweepConfig:
    noise_levels: Tuple[float, ...] = NOISE_LEVELS
    sample_sizes: Tuple[int, ...] = SAMPLE_SIZES
    checkpoints: Tuple[int, ...] = CHECKPOINTS
    seeds: int = SEEDS_PER_CELL
    samples_noise: float = SAMPLES_SWEEP_NOISE
    chunk_size: int = CHUNK_SIZE
    threads: int = THREADS
    literal_metrics: bool = False


@dataclass(frozen=True)
class LatticeConfig:
    epsilon: Optional[float] = EDGE_EPSILON
    epsilon_scale: float = EDGE_EPSILON_SCALE


@dataclass(frozen=True)
class SomConfig:
    alpha: float = SOM_ALPHA
    mode: str = SOM_MODE
    include_disconnected: bool = False


@dataclass(frozen=True)
class CrfSection:
    alpha: float = CRF_ALPHA
    project_simplex: bool = False
    weights: Optional[Tuple[Tuple[float, ...], ...]] = None  # None = identity
    weights_file: Optional[str] = None


@dataclass(frozen=True)
class HopfieldConfig:
    alpha: float = HOPFIELD_ALPHA
    patch: int = PATCH_SIZE
    memories: int = MEMORY_COUNT
    beta: float = HOPFIELD_BETA


@dataclass(frozen=True)
class InitConfig:
    a: float = INIT_CONFIDENCE
    b: float = INIT_NOISE_COUPLING


@dataclass(frozen=True)
class PlotConfig:
    colors: Dict[str, str] = field(default_factory=lambda: dict(MODEL_COLORS))
    metric: str = PLOT_METRIC


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    lattice: LatticeConfig = field(default_factory=LatticeConfig)
    som: SomConfig = field(default_factory=SomConfig)
    crf: CrfSection = field(default_factory=CrfSection)
    hopfield: HopfieldConfig = field(default_factory=HopfieldConfig)
    init: InitConfig = field(default_factory=InitConfig)
    plot: PlotConfig = field(default_factory=PlotConfig)

    def __post_init__(self):
        validate(self)

    def with_overrides(self, seed: Optional[int] = None, threads: Optional[int] = None,
                       literal_metrics: Optional[bool] = None) -> "ExperimentConfig":
        """Return a copy with CLI overrides applied."""
        cfg = self
        if literal_metrics is not None:
            cfg = dataclasses.replace(
                cfg, sweep=dataclasses.replace(cfg.sweep, literal_metrics=literal_metrics)
            )
        if seed is not None:
            cfg = dataclasses.replace(cfg, dataset=dataclasses.replace(cfg.dataset, seed=seed))
        if threads is not None:
            cfg = dataclasses.replace(cfg, sweep=dataclasses.replace(cfg.sweep, threads=threads))
        return cfg


def validate(cfg: ExperimentConfig) -> None:
    """
    Check cross-field invariants.

    Raises:
        ConfigError: If any set is empty or a parameter is out of range
    """
    if not cfg.sweep.noise_levels or not cfg.sweep.sample_sizes or not cfg.sweep.checkpoints:
        raise ConfigError("noise_levels, sample_sizes and checkpoints must be nonempty")
    if cfg.sweep.seeds < 1:
        raise ConfigError(f"seeds must be >= 1, got {cfg.sweep.seeds}")
    if min(cfg.sweep.checkpoints) < 0:
        raise ConfigError("checkpoints must be nonnegative")
    if cfg.sweep.threads < 1 or cfg.sweep.chunk_size < 1:
        raise ConfigError("threads and chunk_size must be >= 1")
    if cfg.dataset.seed < 0:
        raise ConfigError("dataset seed must be nonnegative")
    if cfg.dataset.height < 16 or cfg.dataset.width < 16:
        raise ConfigError("canvas must be at least 16x16")
    for name, alpha in (("som", cfg.som.alpha), ("crf", cfg.crf.alpha), ("hopfield", cfg.hopfield.alpha)):
        if not 0 < alpha <= 1:
            raise ConfigError(f"{name}.alpha must lie in (0, 1], got {alpha}")
    if cfg.som.mode not in ("uniform", "response"):
        raise ConfigError(f"som.mode must be 'uniform' or 'response', got {cfg.som.mode!r}")
    if cfg.lattice.epsilon is not None and cfg.lattice.epsilon < 0:
        raise ConfigError("lattice.epsilon must be nonnegative")
    if cfg.hopfield.patch < 1 or cfg.hopfield.memories < 1 or cfg.hopfield.beta <= 0:
        raise ConfigError("hopfield.patch and hopfield.memories must be >= 1 and beta > 0")
    if cfg.init.a < 0 or cfg.init.b < 0:
        raise ConfigError("init.a and init.b must be nonnegative")


def _coerce(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(_coerce(v) for v in value)
    return value


def config_from_dict(data: Dict[str, Any]) -> ExperimentConfig:
    """
    Build an ExperimentConfig from parsed TOML tables.

    Args:
        data (Dict[str, Any]): Mapping of section name to key/value mapping

    Returns:
        ExperimentConfig: Defaults overridden by the given entries

    Raises:
        ConfigError: If a section or key is unknown
    """
    base = ExperimentConfig()
    sections = {f.name: getattr(base, f.name) for f in dataclasses.fields(base)}
    updated = {}
    for section_name, entries in data.items():
        if section_name not in sections:
            raise ConfigError(f"Unknown config section: [{section_name}]")
        if not isinstance(entries, dict):
            raise ConfigError(f"Config section [{section_name}] must be a table")
        section = sections[section_name]
        known = {f.name for f in dataclasses.fields(section)}
        unknown = sorted(set(entries) - known)
        if unknown:
            raise ConfigError(f"Unknown key(s) in [{section_name}]: {', '.join(unknown)}")
        values = {k: (dict(v) if isinstance(v, dict) else _coerce(v)) for k, v in entries.items()}
        try:
            updated[section_name] = dataclasses.replace(section, **values)
        except TypeError as e:
            raise ConfigError(f"Malformed section [{section_name}]: {e}") from e
    return dataclasses.replace(base, **updated)


def load_config(path: Optional[str]) -> ExperimentConfig:
    """
    Load a TOML config file; None yields the defaults.

    Raises:
        ConfigError: If the file is unreadable, malformed, or has unknown keys
    """
    if path is None:
        return ExperimentConfig()
    try:
        with open(path, "rb") as handle:
            data = tomllib.load(handle)
    except (OSError, tomllib.TOMLDecodeError) as e:
        logger.error(f"Failed to read config {path}: {e}")
        raise ConfigError(f"Cannot read config {path}: {e}") from e
    cfg = config_from_dict(data)
    weights_file = cfg.crf.weights_file
    if weights_file is not None and not Path(weights_file).is_absolute():
        # Relative weight files live next to the config.
        resolved = str(Path(path).parent / weights_file)
        cfg = dataclasses.replace(cfg, crf=dataclasses.replace(cfg.crf, weights_file=resolved))
    logger.info(f"Loaded config from {path}")
    return cfg


def compatibility_matrix(cfg: CrfSection, classes: int) -> np.ndarray:
    """
    Resolve the CRF compatibility matrix from inline weights, a weights file or the identity.

    A relative weights_file has already been anchored to the config directory by load_config.
    """
    if cfg.weights is not None and cfg.weights_file is not None:
        raise ConfigError("Set at most one of crf.weights and crf.weights_file")
    if cfg.weights is not None:
        w = np.asarray(cfg.weights, dtype=np.float64)
    elif cfg.weights_file is not None:
        w = load_weights(Path(cfg.weights_file)).matrix
    else:
        return np.eye(classes)
    if w.shape != (classes, classes):
        raise ConfigError(f"CRF weights must be {classes}x{classes}, got {w.shape}")
    return w
