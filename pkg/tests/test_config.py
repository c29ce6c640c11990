"""Tests for config module."""

import os
from pathlib import Path

import pytest

from posekit.coarse2fine import Parameterization, TransformMode
from posekit.config import (
    FitConfig,
    fit_config_from_dict,
    load_fit_config,
    load_overrides,
    resolve_seed,
)
from posekit.errors import SchemaError


@pytest.fixture
def no_dotenv(mocker):
    """Keep resolve_seed from reading a developer's .env file."""
    return mocker.patch("posekit.config.load_dotenv")


class TestFitConfig:
    """Tests for FitConfig defaults and validation."""

    def test_defaults(self):
        """Should default to the baseline full-affine setup."""
        cfg = FitConfig()
        assert cfg.mode is TransformMode.BASELINE18
        assert cfg.parameterization is Parameterization.FULL_AFFINE
        assert cfg.use_mse is True
        assert cfg.weights.lambda1 == 0.5
        assert cfg.extractor == "identity"
        assert cfg.flip_augment is False

    def test_from_dict(self):
        """Should coerce string values for enums and nested weights."""
        cfg = fit_config_from_dict(
            {
                "mode": "coarse2fine20",
                "parameterization": "constrained",
                "weights": {"lambda2": 2.0},
            }
        )
        assert cfg.mode is TransformMode.COARSE2FINE20
        assert cfg.parameterization is Parameterization.CONSTRAINED
        assert cfg.weights.lambda2 == 2.0

    def test_unknown_key(self):
        """Should reject keys FitConfig does not define."""
        with pytest.raises(SchemaError, match="learning_rate"):
            fit_config_from_dict({"learning_rate": 0.1})

    def test_nested_location(self):
        """Should report dotted locations for nested errors."""
        with pytest.raises(SchemaError, match=r"weights\.lambda1"):
            fit_config_from_dict({"weights": {"lambda1": "heavy"}})

    def test_unknown_extractor(self):
        """Should reject an unregistered feature extractor."""
        with pytest.raises(SchemaError, match="extractor"):
            fit_config_from_dict({"extractor": "vgg"})


class TestLoadOverrides:
    """Tests for load_overrides and load_fit_config."""

    def test_yaml(self, tmp_path: Path):
        """Should read a YAML mapping."""
        path = tmp_path / "fit.yaml"
        path.write_text("max_iters: 25\nuse_mse: false\n")
        cfg = load_fit_config(path)
        assert cfg.max_iters == 25
        assert cfg.use_mse is False

    def test_json(self, tmp_path: Path):
        """Should read JSON through the YAML loader."""
        path = tmp_path / "fit.json"
        path.write_text('{"flip_augment": true}')
        assert load_fit_config(path).flip_augment is True

    def test_empty_file(self, tmp_path: Path):
        """Should treat an empty file as no overrides."""
        path = tmp_path / "fit.yaml"
        path.write_text("")
        assert load_overrides(path) == {}

    def test_not_a_mapping(self, tmp_path: Path):
        """Should reject a top-level list."""
        path = tmp_path / "fit.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(SchemaError, match="mapping"):
            load_overrides(path)

    def test_malformed(self, tmp_path: Path):
        """Should name the line of a YAML syntax error."""
        path = tmp_path / "fit.yaml"
        path.write_text("max_iters: 5\nweights: {lambda1: [\n")
        with pytest.raises(SchemaError, match="line"):
            load_overrides(path)

    def test_missing(self, tmp_path: Path):
        """Should raise SchemaError for a missing file."""
        with pytest.raises(SchemaError, match="cannot read"):
            load_overrides(tmp_path / "absent.yaml")


class TestResolveSeed:
    """Tests for resolve_seed function."""

    def test_flag_wins(self, no_dotenv, mocker):
        """Should prefer the command-line flag."""
        mocker.patch.dict(os.environ, {"POSEKIT_SEED": "7"})
        assert resolve_seed(3, {"seed": 5}) == 3

    def test_config_before_env(self, no_dotenv, mocker):
        """Should use the override file's seed before the environment."""
        mocker.patch.dict(os.environ, {"POSEKIT_SEED": "7"})
        assert resolve_seed(None, {"seed": 5}) == 5
        no_dotenv.assert_not_called()

    def test_env(self, no_dotenv, mocker):
        """Should fall back to POSEKIT_SEED."""
        mocker.patch.dict(os.environ, {"POSEKIT_SEED": "7"})
        assert resolve_seed(None) == 7
        no_dotenv.assert_called_once()

    def test_default(self, no_dotenv, mocker):
        """Should default to 0 when nothing sets a seed."""
        mocker.patch.dict(os.environ, {}, clear=True)
        assert resolve_seed(None, {}) == 0

    def test_bad_env(self, no_dotenv, mocker):
        """Should reject a non-integer POSEKIT_SEED."""
        mocker.patch.dict(os.environ, {"POSEKIT_SEED": "seven"})
        with pytest.raises(SchemaError, match="POSEKIT_SEED"):
            resolve_seed(None)
