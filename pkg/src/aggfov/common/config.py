"""Pydantic settings and hyperparameter models for aggfov."""

from enum import Enum
from pathlib import Path
from typing import Any, Literal, Optional

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from aggfov.common.errors import ConfigError


class LogLevel(str, Enum):
    """Log level enumeration."""

    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    CRITICAL = "CRITICAL"


class LossConfig(BaseModel):
    """Weights of the hallucination loss."""

    model_config = ConfigDict(populate_by_name=True, frozen=True)

    lambda_: float = Field(
        default=50.0,
        ge=0.0,
        alias="lambda",
        description="Weight of the edge-aware smoothness term",
    )
    delta: float = Field(
        default=0.001, gt=0.0, description="Huber threshold on image gradients"
    )
    gradient_op: Literal["forward-difference"] = Field(
        default="forward-difference", description="Image gradient operator"
    )


class AdamConfig(BaseModel):
    """Adam hyperparameters."""

    model_config = ConfigDict(frozen=True)

    lr: float = Field(default=0.0005, gt=0.0, description="Learning rate")
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    eps: float = Field(default=1e-8, gt=0.0)


class TrainConfig(BaseModel):
    """Training loop configuration."""

    steps: Optional[int] = Field(
        default=None, ge=0, description="Optimizer steps (wins over epochs)"
    )
    epochs: Optional[int] = Field(default=None, ge=0, description="Epoch budget")
    batch_per_worker: int = Field(default=7, ge=1)
    workers: int = Field(default=1, ge=1)
    accumulate: int = Field(
        default=1, ge=1, description="Sequential shards per worker per step"
    )
    loss: LossConfig = Field(default_factory=LossConfig)
    optimizer: AdamConfig = Field(default_factory=AdamConfig)
    checkpoint_interval: int = Field(
        default=0, ge=0, description="Steps between checkpoints (0 = final only)"
    )
    log_interval: int = Field(default=10, ge=1)
    seed: int = Field(default=0)

    @property
    def shards_per_step(self) -> int:
        """Number of shards one optimizer step is split into."""
        return self.workers * self.accumulate

    @property
    def global_batch(self) -> int:
        """Images consumed by one optimizer step."""
        return self.shards_per_step * self.batch_per_worker

    def total_steps(self, dataset_size: int) -> int:
        """Resolve the step budget for a dataset of ``dataset_size`` pairs."""
        if self.steps is not None:
            return self.steps
        if self.epochs is not None:
            per_epoch = max(1, dataset_size // self.global_batch)
            return self.epochs * per_epoch
        return 0


class CommonSettings(BaseSettings):
    """Common settings shared by all components."""

    model_config = SettingsConfigDict(
        env_prefix="AGGFOV_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    log_level: LogLevel = Field(default=LogLevel.INFO, description="Logging level")

    data_home: str = Field(
        default="./data",
        description="Base directory for generated datasets and runs",
    )

    threads: int = Field(
        default=1,
        ge=1,
        description="Cap on intra-op parallelism (1 = bitwise-deterministic mode)",
    )

    debug: bool = Field(
        default=False,
        description="Check every forward result for NaN/Inf",
    )


class RunConfig(CommonSettings):
    """Flat, fully resolved settings of one CLI run."""

    manifest: Optional[str] = Field(default=None, description="Dataset manifest")
    run_dir: str = Field(default="./runs/default", description="Output directory")
    checkpoint: Optional[str] = Field(default=None, description="Checkpoint path")
    resume: Optional[str] = Field(
        default=None, description="Checkpoint to resume (weights, optimizer, step)"
    )
    init_from: Optional[str] = Field(
        default=None, description="Checkpoint to fine-tune from (weights only)"
    )
    seed: int = Field(default=0)
    split_ratio: float = Field(
        default=1.0, ge=0.0, le=1.0, description="Training share of the manifest"
    )

    steps: Optional[int] = Field(default=None, ge=0)
    epochs: Optional[int] = Field(default=None, ge=0)
    workers: int = Field(default=1, ge=1)
    batch_per_worker: int = Field(default=7, ge=1)
    accumulate: int = Field(default=1, ge=1)
    checkpoint_interval: int = Field(default=0, ge=0)
    log_interval: int = Field(default=10, ge=1)

    lr: float = Field(default=0.0005, gt=0.0)
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    eps: float = Field(default=1e-8, gt=0.0)

    lambda_: float = Field(default=50.0, ge=0.0)
    delta: float = Field(default=0.001, gt=0.0)

    @model_validator(mode="after")
    def check_paths(self) -> "RunConfig":
        """Reject contradictory checkpoint sources."""
        if self.resume and self.init_from:
            raise ValueError("resume and init_from are mutually exclusive")
        return self

    @property
    def run_path(self) -> Path:
        """Run directory as a Path."""
        return Path(self.run_dir)

    def loss_config(self) -> LossConfig:
        """Build the loss configuration."""
        return LossConfig(lambda_=self.lambda_, delta=self.delta)

    def train_config(self) -> TrainConfig:
        """Build the training configuration."""
        return TrainConfig(
            steps=self.steps,
            epochs=self.epochs,
            batch_per_worker=self.batch_per_worker,
            workers=self.workers,
            accumulate=self.accumulate,
            loss=self.loss_config(),
            optimizer=AdamConfig(
                lr=self.lr, beta1=self.beta1, beta2=self.beta2, eps=self.eps
            ),
            checkpoint_interval=self.checkpoint_interval,
            log_interval=self.log_interval,
            seed=self.seed,
        )


def normalize_key(key: str) -> str:
    """Map a config-file key or CLI flag name onto a RunConfig field name."""
    name = key.strip().lower().lstrip("-").replace("-", "_")
    if name == "lambda":
        return "lambda_"
    return name


def resolve_run_config(
    config_path: Optional[str | Path] = None,
    overrides: Optional[dict[str, Any]] = None,
    env_file: Optional[str] = ".env",
) -> RunConfig:
    """Merge a ``key = value`` config file with CLI overrides.

    Flags override file values; ``None`` overrides are ignored so unset flags
    fall through to the file and then to the environment.

    Raises:
        ConfigError: Unknown keys, unreadable file or invalid values
    """
    values: dict[str, Any] = {}
    if config_path is not None:
        path = Path(config_path)
        if not path.is_file():
            raise ConfigError(f"Config file not found: {path}")
        for key, value in dotenv_values(path, encoding="utf-8").items():
            if value is None:
                raise ConfigError(f"Config key without value: {key}")
            values[normalize_key(key)] = value

    for key, value in (overrides or {}).items():
        if value is not None:
            values[normalize_key(key)] = value

    unknown = sorted(set(values) - set(RunConfig.model_fields))
    if unknown:
        raise ConfigError(f"Unknown config keys: {', '.join(unknown)}")

    try:
        return RunConfig(_env_file=env_file, **values)  # type: ignore[call-arg]
    except ValidationError as e:
        raise ConfigError(str(e)) from e


def write_resolved_config(
    config: RunConfig, run_dir: Optional[str | Path] = None
) -> Path:
    """Echo the resolved config to ``<run_dir>/config.resolved``."""
    directory = Path(run_dir) if run_dir is not None else config.run_path
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / "config.resolved"
    lines = []
    for name, value in sorted(config.model_dump().items()):
        if value is None:
            continue
        if isinstance(value, Enum):
            value = value.value
        key = "lambda" if name == "lambda_" else name
        lines.append(f"{key} = {value}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def get_common_settings() -> CommonSettings:
    """Get common settings instance."""
    return CommonSettings()
