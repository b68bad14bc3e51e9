"""
Checkpoint persistence: parameter tensors plus run metadata in one .npz file
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Union
import logging

import numpy as np
from pydantic import BaseModel, ValidationError

from core.errors import ConfigError
from core.schemas import TrainConfig
from ml_models.sparse_structure import ModelParams
from services.text_pipeline import Vocabulary

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
PARAM_PREFIX = "param::"
META_KEY = "meta"


class CheckpointMeta(BaseModel):
    version: int = CHECKPOINT_VERSION
    config: Dict[str, Any]
    epoch: int
    val_accuracy: float
    vocab_words: List[str]
    vocab_counts: List[int]
    label_names: List[str]


@dataclass
class Checkpoint:
    """Parameter snapshot of the selected epoch with what is needed to reuse it"""
    params: ModelParams
    config: TrainConfig
    epoch: int
    val_accuracy: float
    vocab: Vocabulary
    label_names: List[str]

    @property
    def num_classes(self) -> int:
        return len(self.label_names)


def save_checkpoint(checkpoint: Checkpoint, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = CheckpointMeta(
        config=checkpoint.config.model_dump(mode="json", by_alias=True),
        epoch=checkpoint.epoch,
        val_accuracy=checkpoint.val_accuracy,
        vocab_words=checkpoint.vocab.id_to_word,
        vocab_counts=checkpoint.vocab.counts,
        label_names=checkpoint.label_names,
    )
    arrays = {f"{PARAM_PREFIX}{name}": value for name, value in checkpoint.params.tensors.items()}
    arrays[META_KEY] = np.array(meta.model_dump_json())
    # np.savez appends .npz to bare names; write through a handle to keep the path exact
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    logger.info(f"Saved checkpoint (epoch {checkpoint.epoch}) to {path}")
    return path


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"checkpoint not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as data:
            meta = CheckpointMeta.model_validate_json(str(data[META_KEY]))
            tensors = {
                key[len(PARAM_PREFIX):]: np.array(data[key])
                for key in data.files
                if key.startswith(PARAM_PREFIX)
            }
    except (KeyError, ValueError, OSError, ValidationError) as e:
        raise ConfigError(f"unreadable checkpoint {path}: {str(e)}") from e
    if meta.version != CHECKPOINT_VERSION:
        raise ConfigError(f"checkpoint version {meta.version} is not supported (expected {CHECKPOINT_VERSION})")
    return Checkpoint(
        params=ModelParams(tensors),
        config=TrainConfig.model_validate(meta.config),
        epoch=meta.epoch,
        val_accuracy=meta.val_accuracy,
        vocab=Vocabulary(meta.vocab_words, meta.vocab_counts),
        label_names=meta.label_names,
    )
