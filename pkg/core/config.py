"""
Configuration settings for the document graph structure learner
"""
from pathlib import Path
from typing import Any, Dict, Optional, Union
import logging

from dotenv import dotenv_values
from pydantic import ValidationError, field_validator
from pydantic_settings import BaseSettings

from core.errors import ConfigError
from core.schemas import TrainConfig

logger = logging.getLogger(__name__)


class Settings(BaseSettings):
    # Project
    PROJECT_NAME: str = "DocGraph Structure Learner"

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "text"  # text, json

    # Runs
    OUTPUT_DIR: str = "runs"
    DEFAULT_SEED: int = 42
    SHOW_PROGRESS: bool = True
    EVAL_BATCH_SIZE: int = 64
    ABLATION_RUNS: int = 3

    @field_validator("LOG_LEVEL", mode="before")
    @classmethod
    def normalize_log_level(cls, v: str) -> str:
        level = str(v).upper()
        if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"unknown log level: {v}")
        return level

    class Config:
        env_file = ".env"
        env_prefix = "DOCGRAPH_"
        case_sensitive = True
        extra = "ignore"


settings = Settings()


# "lambda" is the documented key; "lam" is accepted as well
_KEY_ALIASES = {"lambda": "lam", "layers": "num_layers", "k": "num_layers", "b": "hidden_dim", "d0": "embedding_dim"}


def make_train_config(**values: Any) -> TrainConfig:
    """Build a validated TrainConfig, reporting problems as ConfigError"""
    normalized: Dict[str, Any] = {}
    for key, value in values.items():
        name = _KEY_ALIASES.get(key.strip().lower(), key.strip().lower())
        normalized[name] = value
    unknown = sorted(set(normalized) - set(TrainConfig.model_fields))
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    try:
        return TrainConfig.model_validate(normalized)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"invalid configuration: {problems}") from e


def read_config_file(path: Union[str, Path]) -> Dict[str, Optional[str]]:
    """Read a line-oriented `key = value` file"""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    values = dotenv_values(path)
    missing = [key for key, value in values.items() if value is None]
    if missing:
        raise ConfigError(f"{path}: keys without a value: {', '.join(missing)}")
    return dict(values)


def load_train_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> TrainConfig:
    """Load a training configuration; explicit overrides win over file values"""
    values: Dict[str, Any] = {}
    if path is not None:
        values.update(read_config_file(path))
        logger.info(f"Loaded {len(values)} configuration values from {path}")
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    return make_train_config(**values)


def write_config_file(config: TrainConfig, path: Union[str, Path]) -> Path:
    """Write a configuration back in the `key = value` layout"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for key, value in config.model_dump(mode="json", by_alias=True).items():
        if isinstance(value, bool):
            value = str(value).lower()
        lines.append(f"{key} = {value}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
