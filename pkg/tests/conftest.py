import numpy as np
import pytest

from lattice_relax.config import ExperimentConfig, config_from_dict


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def tiny_config() -> ExperimentConfig:
    """A sweep small enough to run in a couple of seconds."""
    return config_from_dict({
        "dataset": {"height": 16, "width": 16, "n_test": 6},
        "sweep": {
            "noise_levels": [10.0, 100.0],
            "sample_sizes": [4, 8],
            "checkpoints": [0, 3],
            "seeds": 2,
            "chunk_size": 4,
        },
        "hopfield": {"patch": 4, "memories": 8},
    })


def random_simplex(rng: np.random.Generator, *shape: int) -> np.ndarray:
    values = rng.random(shape) + 0.05
    return values / values.sum(axis=-1, keepdims=True)
