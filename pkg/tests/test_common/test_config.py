"""Tests for configuration settings."""

from pathlib import Path

import pytest
from pydantic import ValidationError

from aggfov.common.config import (
    CommonSettings,
    LogLevel,
    LossConfig,
    TrainConfig,
    normalize_key,
    resolve_run_config,
    write_resolved_config,
)
from aggfov.common.errors import ConfigError


class TestCommonSettings:
    """Tests for CommonSettings."""

    def test_defaults(self) -> None:
        """Test default values without an env file."""
        settings = CommonSettings(_env_file=None)

        assert settings.log_level == LogLevel.INFO
        assert settings.data_home == "./data"
        assert settings.threads == 1
        assert settings.debug is False

    def test_custom_data_home(self) -> None:
        """Test custom data_home setting."""
        settings = CommonSettings(_env_file=None, data_home="/custom/data")

        assert settings.data_home == "/custom/data"

    def test_threads_from_environment(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Test AGGFOV_THREADS is picked up."""
        monkeypatch.setenv("AGGFOV_THREADS", "4")
        settings = CommonSettings(_env_file=None)

        assert settings.threads == 4

    def test_threads_must_be_positive(self) -> None:
        """Test zero threads is rejected."""
        with pytest.raises(ValidationError):
            CommonSettings(_env_file=None, threads=0)


class TestLossConfig:
    """Tests for LossConfig."""

    def test_defaults(self) -> None:
        """Test the published hyperparameter defaults."""
        cfg = LossConfig()

        assert cfg.lambda_ == 50.0
        assert cfg.delta == 0.001
        assert cfg.gradient_op == "forward-difference"

    def test_lambda_alias(self) -> None:
        """Test the 'lambda' alias populates lambda_."""
        cfg = LossConfig.model_validate({"lambda": 10})

        assert cfg.lambda_ == 10.0

    def test_delta_must_be_positive(self) -> None:
        """Test delta 0 is rejected."""
        with pytest.raises(ValidationError):
            LossConfig(delta=0.0)


class TestTrainConfig:
    """Tests for TrainConfig."""

    def test_global_batch(self) -> None:
        """Test global batch is workers x accumulate x batch_per_worker."""
        cfg = TrainConfig(workers=2, accumulate=3, batch_per_worker=5)

        assert cfg.shards_per_step == 6
        assert cfg.global_batch == 30

    def test_steps_win_over_epochs(self) -> None:
        """Test an explicit step budget overrides epochs."""
        cfg = TrainConfig(steps=12, epochs=100)

        assert cfg.total_steps(1000) == 12

    def test_epoch_budget(self) -> None:
        """Test epochs convert to whole steps per epoch."""
        cfg = TrainConfig(epochs=8, batch_per_worker=7)

        assert cfg.total_steps(14) == 16

    def test_epoch_budget_small_dataset(self) -> None:
        """Test a dataset smaller than one batch still gets one step per epoch."""
        cfg = TrainConfig(epochs=3, batch_per_worker=7)

        assert cfg.total_steps(4) == 3


class TestNormalizeKey:
    """Tests for normalize_key."""

    @pytest.mark.parametrize(
        "key,expected",
        [
            ("batch-per-worker", "batch_per_worker"),
            ("--workers", "workers"),
            ("LR", "lr"),
            ("lambda", "lambda_"),
            (" split_ratio ", "split_ratio"),
        ],
    )
    def test_normalize(self, key: str, expected: str) -> None:
        """Test flag and file spellings map to field names."""
        assert normalize_key(key) == expected


class TestResolveRunConfig:
    """Tests for resolve_run_config."""

    def test_file_values(self, tmp_path: Path) -> None:
        """Test values are read from a flat key = value file."""
        path = tmp_path / "run.conf"
        path.write_text(
            "# training run\nlambda = 10\nbatch-per-worker = 3\nworkers = 2\n",
            encoding="utf-8",
        )
        config = resolve_run_config(path, env_file=None)

        assert config.lambda_ == 10.0
        assert config.batch_per_worker == 3
        assert config.workers == 2

    def test_flags_override_file(self, tmp_path: Path) -> None:
        """Test CLI overrides win and None overrides fall through."""
        path = tmp_path / "run.conf"
        path.write_text("workers = 2\nseed = 5\n", encoding="utf-8")
        config = resolve_run_config(path, {"workers": 4, "seed": None}, env_file=None)

        assert config.workers == 4
        assert config.seed == 5

    def test_unknown_key(self, tmp_path: Path) -> None:
        """Test an unknown key raises ConfigError."""
        path = tmp_path / "run.conf"
        path.write_text("learning_rate = 0.1\n", encoding="utf-8")

        with pytest.raises(ConfigError, match="learning_rate"):
            resolve_run_config(path, env_file=None)

    def test_invalid_value(self) -> None:
        """Test a value failing validation raises ConfigError."""
        with pytest.raises(ConfigError):
            resolve_run_config(None, {"workers": "zero"}, env_file=None)

    def test_missing_file(self, tmp_path: Path) -> None:
        """Test a missing config file raises ConfigError."""
        with pytest.raises(ConfigError, match="not found"):
            resolve_run_config(tmp_path / "absent.conf", env_file=None)

    def test_resume_and_init_from_exclusive(self) -> None:
        """Test resume and init_from cannot be combined."""
        with pytest.raises(ConfigError):
            resolve_run_config(
                None, {"resume": "a.agfv", "init_from": "b.agfv"}, env_file=None
            )

    def test_train_config(self) -> None:
        """Test the flat fields build nested train/loss/optimizer models."""
        config = resolve_run_config(
            None, {"lr": 0.01, "lambda": 0, "steps": 7, "accumulate": 2}, env_file=None
        )
        train = config.train_config()

        assert train.optimizer.lr == 0.01
        assert train.loss.lambda_ == 0.0
        assert train.steps == 7
        assert train.accumulate == 2


class TestWriteResolvedConfig:
    """Tests for write_resolved_config."""

    def test_writes_key_value_lines(self, tmp_path: Path) -> None:
        """Test the echo uses the input format and the lambda spelling."""
        config = resolve_run_config(None, {"lambda": 5, "seed": 9}, env_file=None)
        path = write_resolved_config(config, tmp_path)
        lines = path.read_text(encoding="utf-8").splitlines()

        assert path.name == "config.resolved"
        assert "lambda = 5.0" in lines
        assert "seed = 9" in lines
        assert "log_level = INFO" in lines

    def test_echo_resolves_to_same_config(self, tmp_path: Path) -> None:
        """Test the resolved file reproduces the configuration."""
        config = resolve_run_config(
            None, {"workers": 3, "lr": 0.002, "run_dir": str(tmp_path)}, env_file=None
        )
        path = write_resolved_config(config)

        again = resolve_run_config(path, env_file=None)

        assert again.model_dump() == config.model_dump()
