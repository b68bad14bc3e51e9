"""
Pydantic schemas for configuration, metrics and command results
"""
from enum import Enum
from typing import Any, Dict, List, Literal, Optional
import logging

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

logger = logging.getLogger(__name__)

# Search spaces reported for the published experiments
BATCH_SIZE_SPACE = (16, 64, 128, 256)
HIDDEN_DIM_SPACE = (96, 256, 512)
LEARNING_RATE_SPACE = (1e-4, 5e-4, 1e-3)
DROPOUT_SPACE = (0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0)
LAYER_SPACE = (2, 3)


class GraphMode(str, Enum):
    """How a document graph is built and whether its structure is learned"""
    WORDCOOC = "wordcooc"
    DISJOINT = "disjoint"
    COMPLETE = "complete"
    OURS = "ours"


class HyperParams(BaseModel):
    """Model hyperparameters used by a forward pass"""
    model_config = ConfigDict(frozen=True)

    mode: GraphMode = GraphMode.OURS
    num_layers: int = 2
    hidden_dim: int = 96
    tau: float = 0.5
    threshold: float = 0.5
    lam: float = 0.1
    dropout: float = 0.0
    readout: Literal["sum", "mean"] = "sum"

    @property
    def effective_threshold(self) -> float:
        """Selector threshold after applying the graph mode"""
        if self.mode == GraphMode.DISJOINT:
            return 1.0
        if self.mode == GraphMode.COMPLETE:
            return 0.0
        return self.threshold

    @property
    def learns_structure(self) -> bool:
        return self.mode != GraphMode.WORDCOOC


class TrainConfig(BaseModel):
    """Full training configuration; file keys use the same names"""
    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    mode: GraphMode = GraphMode.OURS
    num_layers: int = 2
    hidden_dim: int = 96
    embedding_dim: int = 300
    tau: float = 0.5
    threshold: float = 0.5
    lam: float = Field(0.1, alias="lambda")
    dropout: float = 0.1
    lr: float = 1e-3
    batch_size: int = 16
    epochs: int = 200
    seed: int = 42
    window: int = 3
    val_fraction: float = 0.1
    min_count: int = 1
    readout: Literal["sum", "mean"] = "sum"
    train_embeddings: bool = True

    @field_validator("tau")
    @classmethod
    def check_tau(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("tau must be > 0")
        return v

    @field_validator("threshold")
    @classmethod
    def check_threshold(cls, v: float) -> float:
        if not 0.0 <= v <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")
        return v

    @field_validator("lam")
    @classmethod
    def check_lambda(cls, v: float) -> float:
        if v < 0:
            raise ValueError("lambda must be >= 0")
        return v

    @field_validator("dropout")
    @classmethod
    def check_dropout(cls, v: float) -> float:
        # rate 1.0 would need a division by zero in inverted dropout
        if not 0.0 <= v < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        return v

    @field_validator("lr")
    @classmethod
    def check_lr(cls, v: float) -> float:
        if v < 0:
            raise ValueError("lr must be >= 0")
        return v

    @field_validator("val_fraction")
    @classmethod
    def check_val_fraction(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError("val_fraction must lie in (0, 1)")
        return v

    @field_validator("window")
    @classmethod
    def check_window(cls, v: int) -> int:
        if v < 2:
            raise ValueError("window must be >= 2")
        return v

    @field_validator("num_layers", "hidden_dim", "embedding_dim", "batch_size", "min_count")
    @classmethod
    def check_positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be >= 1")
        return v

    @field_validator("epochs")
    @classmethod
    def check_epochs(cls, v: int) -> int:
        if v < 0:
            raise ValueError("epochs must be >= 0")
        return v

    @model_validator(mode="after")
    def warn_outside_search_space(self) -> "TrainConfig":
        checks = [
            ("batch_size", self.batch_size, BATCH_SIZE_SPACE),
            ("hidden_dim", self.hidden_dim, HIDDEN_DIM_SPACE),
            ("lr", self.lr, LEARNING_RATE_SPACE),
            ("dropout", self.dropout, DROPOUT_SPACE),
            ("num_layers", self.num_layers, LAYER_SPACE),
        ]
        for name, value, space in checks:
            if value not in space:
                logger.warning(f"{name}={value} is outside the reported search space {space}")
        return self

    def hyper_params(self) -> HyperParams:
        """Project the training configuration onto model hyperparameters"""
        return HyperParams(
            mode=self.mode,
            num_layers=self.num_layers,
            hidden_dim=self.hidden_dim,
            tau=self.tau,
            threshold=self.threshold,
            lam=self.lam,
            dropout=self.dropout,
            readout=self.readout,
        )


class SyntheticCorpusSpec(BaseModel):
    """Parameters of a generated desk-scale corpus"""
    num_docs: int = 200
    num_classes: int = 2
    vocab_size: int = 20
    sentences_per_doc: int = 2
    tokens_per_sentence: int = 5
    task: Literal["bag", "cross_sentence_xor"] = "bag"
    test_fraction: float = 0.2


class LossReport(BaseModel):
    """Loss terms of one forward pass or averaged over an epoch"""
    pred: float
    reg: List[float] = []
    lam: float = 0.0
    total: float


class ClassMetrics(BaseModel):
    label: str
    precision: float
    recall: float
    f1: float
    support: int


class Metrics(BaseModel):
    """Evaluation metrics for a labelled set of documents"""
    accuracy: float
    micro_f1: float
    macro_f1: float
    per_class: List[ClassMetrics] = []
    num_documents: int = 0
    loss: Optional[LossReport] = None
    selected_edge_ratio: Optional[float] = None
    selected_per_layer: List[int] = []


class EpochRecord(BaseModel):
    """One line of the training metric log"""
    epoch: int
    train_loss: Optional[float] = None
    train_pred_loss: Optional[float] = None
    train_reg_loss: Optional[float] = None
    val_accuracy: float
    val_micro_f1: float
    val_macro_f1: float
    selected_ratio: Optional[float] = None
    selected_per_layer: Optional[List[int]] = None

    def to_line(self) -> str:
        """Machine-readable key=value record; lists are comma-joined"""
        tokens = []
        for key, value in self.model_dump().items():
            if value is None:
                continue
            if isinstance(value, list):
                tokens.append(f"{key}=" + ",".join(str(v) for v in value))
                continue
            tokens.append(f"{key}={value!r}")
        return " ".join(tokens)


class CorpusStats(BaseModel):
    """Dataset statistics in the layout of the usual benchmark summary table"""
    num_docs: int
    num_train: int
    num_val: int
    num_test: int
    num_classes: int
    vocab_size: int
    avg_length: float
    avg_sentences: float
    imbalance_ratio: float
    prop_new_words: float


class CommandResult(BaseModel):
    """Structured summary printed by every command"""
    command: str
    exit_code: int = 0
    summary: Dict[str, Any] = {}
    artifacts: Dict[str, str] = {}
    error: Optional[str] = None
    error_code: Optional[str] = None
