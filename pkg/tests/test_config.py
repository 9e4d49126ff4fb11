from pathlib import Path

import numpy as np
import pytest

from lattice_relax.config import (
    MODEL_COLORS,
    NOISE_LEVELS,
    ConfigError,
    CrfSection,
    ExperimentConfig,
    compatibility_matrix,
    config_from_dict,
    load_config,
)


class TestLoadConfig:

    def test_defaults(self):
        cfg = load_config(None)
        assert cfg.sweep.noise_levels == NOISE_LEVELS
        assert cfg.sweep.checkpoints == (0, 20, 40, 60)
        assert cfg.plot.colors == MODEL_COLORS
        assert cfg.plot.metric == "mean_iou"

    def test_reads_toml(self, tmp_path):
        path = tmp_path / "experiment.toml"
        path.write_text(
            "[sweep]\nnoise_levels = [5.0, 15.0]\nseeds = 3\n\n"
            "[som]\nmode = \"response\"\ninclude_disconnected = true\n\n"
            "[plot.colors]\nsom = \"#000000\"\n"
        )
        cfg = load_config(str(path))
        assert cfg.sweep.noise_levels == (5.0, 15.0)
        assert cfg.sweep.seeds == 3
        assert cfg.som.mode == "response" and cfg.som.include_disconnected
        assert cfg.plot.colors == {"som": "#000000"}
        assert cfg.dataset == ExperimentConfig().dataset

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="Unknown config section"):
            config_from_dict({"optimizer": {"lr": 0.1}})

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="alpah"):
            config_from_dict({"som": {"alpah": 0.1}})

    def test_malformed_toml(self, tmp_path):
        path = tmp_path / "broken.toml"
        path.write_text("[sweep\nseeds = 2\n")
        with pytest.raises(ConfigError):
            load_config(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(str(tmp_path / "absent.toml"))

    @pytest.mark.parametrize("section, entries", [
        ("som", {"alpha": 0.0}),
        ("crf", {"alpha": 1.5}),
        ("som", {"mode": "gradient"}),
        ("sweep", {"checkpoints": []}),
        ("sweep", {"seeds": 0}),
        ("dataset", {"height": 8}),
        ("lattice", {"epsilon": -1.0}),
        ("init", {"b": -0.5}),
    ])
    def test_invalid_values(self, section, entries):
        with pytest.raises(ConfigError):
            config_from_dict({section: entries})


class TestOverrides:

    def test_applies_given_values(self, tiny_config):
        cfg = tiny_config.with_overrides(seed=42, threads=3, literal_metrics=True)
        assert cfg.dataset.seed == 42
        assert cfg.sweep.threads == 3
        assert cfg.sweep.literal_metrics
        assert cfg.sweep.noise_levels == tiny_config.sweep.noise_levels

    def test_none_keeps_config(self, tiny_config):
        assert tiny_config.with_overrides() == tiny_config

    def test_invalid_override(self, tiny_config):
        with pytest.raises(ConfigError):
            tiny_config.with_overrides(threads=0)


class TestCompatibilityMatrix:

    def test_identity_default(self):
        np.testing.assert_array_equal(compatibility_matrix(CrfSection(), 3), np.eye(3))

    def test_inline(self):
        cfg = CrfSection(weights=((1.0, 0.5), (0.5, 1.0)))
        np.testing.assert_array_equal(compatibility_matrix(cfg, 2), [[1.0, 0.5], [0.5, 1.0]])

    def test_wrong_size(self):
        with pytest.raises(ConfigError):
            compatibility_matrix(CrfSection(weights=((1.0,),)), 2)

    def test_both_sources(self):
        with pytest.raises(ConfigError):
            compatibility_matrix(CrfSection(weights=((1.0,),), weights_file="w.txt"), 1)

    def test_weights_file_next_to_config(self, tmp_path):
        (tmp_path / "w.txt").write_text("2 0\n0 2\n")
        config_path = tmp_path / "experiment.toml"
        config_path.write_text("[crf]\nweights_file = \"w.txt\"\n")
        cfg = load_config(str(config_path))
        assert Path(cfg.crf.weights_file) == tmp_path / "w.txt"
        np.testing.assert_array_equal(compatibility_matrix(cfg.crf, 2), 2.0 * np.eye(2))
