"""
Training service: seeded mini-batch training with best-validation model
selection, and evaluation metrics
"""
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union
import logging

import numpy as np
from sklearn.metrics import accuracy_score, f1_score, precision_recall_fscore_support
from tqdm import tqdm

from core.config import settings
from core.errors import ConfigError
from core.schemas import ClassMetrics, EpochRecord, HyperParams, LossReport, Metrics, TrainConfig
from ml_models.checkpoint import Checkpoint
from ml_models.optim import AdamOptimizer
from ml_models.sparse_structure import ModelParams, forward_document
from services.graph_service import DocumentGraph, assemble_document_graph, batch_graphs
from services.text_pipeline import (
    Corpus,
    Document,
    Vocabulary,
    build_vocab,
    load_embeddings,
    random_embeddings,
    split_train_val,
)
from utils.seeding import derive_seed

logger = logging.getLogger(__name__)


def build_graphs(
    documents: Sequence[Document],
    vocab: Vocabulary,
    config: TrainConfig,
    show_progress: bool = False,
    desc: str = "graphs",
) -> List[DocumentGraph]:
    """Encode documents and build their graphs once, ahead of training"""
    return [
        assemble_document_graph(vocab.encode_document(doc), mode=config.mode, window=config.window)
        for doc in tqdm(documents, desc=desc, disable=not show_progress, leave=False)
    ]


def compute_metrics(
    y_true: Sequence[int], y_pred: Sequence[int], label_names: Sequence[str]
) -> Metrics:
    """Accuracy, micro/macro F1 and per-class scores; 0/0 counts as 0"""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.size == 0:
        raise ConfigError("cannot compute metrics on an empty set")
    labels = list(range(len(label_names)))
    precision, recall, f1, support = precision_recall_fscore_support(
        y_true, y_pred, labels=labels, zero_division=0
    )
    per_class = [
        ClassMetrics(
            label=label_names[i],
            precision=float(precision[i]),
            recall=float(recall[i]),
            f1=float(f1[i]),
            support=int(support[i]),
        )
        for i in labels
    ]
    return Metrics(
        accuracy=float(accuracy_score(y_true, y_pred)),
        micro_f1=float(f1_score(y_true, y_pred, labels=labels, average="micro", zero_division=0)),
        macro_f1=float(f1_score(y_true, y_pred, labels=labels, average="macro", zero_division=0)),
        per_class=per_class,
        num_documents=int(y_true.size),
    )


@dataclass
class EvaluationPass:
    y_true: np.ndarray
    y_pred: np.ndarray
    loss: LossReport
    selected_ratio: Optional[float]
    selected_per_layer: List[int]


def evaluate_graphs(
    graphs: Sequence[DocumentGraph], params: ModelParams, hyper: HyperParams, batch_size: int
) -> EvaluationPass:
    """Eval-mode forward over graphs in fixed order"""
    if not graphs:
        raise ConfigError("cannot evaluate an empty set of documents")
    y_true, y_pred = [], []
    pred_sum, total_sum = 0.0, 0.0
    reg_sum: Optional[np.ndarray] = None
    selected, candidates = 0, 0
    per_layer = np.zeros(hyper.num_layers, dtype=np.int64)
    for start in range(0, len(graphs), batch_size):
        batch = batch_graphs(graphs[start:start + batch_size])
        result = forward_document(batch, params, hyper, training=False)
        n = batch.num_graphs
        y_true.extend(batch.labels.tolist())
        y_pred.extend(result.predictions.tolist())
        pred_sum += result.breakdown.pred * n
        total_sum += result.breakdown.total * n
        if result.breakdown.reg:
            reg = np.asarray(result.breakdown.reg) * n
            reg_sum = reg if reg_sum is None else reg_sum + reg
        selected += len(result.final_global_edges)
        candidates += batch.candidate_src.size
        per_layer += np.asarray(result.selected_per_layer, dtype=np.int64)
    count = len(graphs)
    loss = LossReport(
        pred=pred_sum / count,
        reg=[] if reg_sum is None else (reg_sum / count).tolist(),
        lam=hyper.lam,
        total=total_sum / count,
    )
    return EvaluationPass(
        y_true=np.asarray(y_true),
        y_pred=np.asarray(y_pred),
        loss=loss,
        selected_ratio=selected / candidates if candidates else None,
        selected_per_layer=per_layer.tolist(),
    )


class TrainingService:
    """Trains one model for one configuration"""

    def __init__(
        self,
        config: TrainConfig,
        embeddings_path: Optional[Union[str, Path]] = None,
        show_progress: Optional[bool] = None,
        eval_batch_size: Optional[int] = None,
    ):
        self.config = config
        self.hyper = config.hyper_params()
        self.embeddings_path = embeddings_path
        self.show_progress = settings.SHOW_PROGRESS if show_progress is None else show_progress
        self.eval_batch_size = eval_batch_size or settings.EVAL_BATCH_SIZE

    def split(self, corpus: Corpus) -> Tuple[List[Document], List[Document]]:
        """Training and validation documents; holds out validation if the corpus has none"""
        train_docs = corpus.by_split("train")
        if not train_docs:
            raise ConfigError("training split is empty")
        val_docs = corpus.by_split("val")
        if not val_docs:
            train_docs, val_docs = split_train_val(train_docs, self.config.val_fraction, self.config.seed)
            logger.info(f"Held out {len(val_docs)} of {len(train_docs) + len(val_docs)} training documents for validation")
        return train_docs, val_docs

    def embedding_table(self, vocab: Vocabulary) -> np.ndarray:
        if self.embeddings_path is not None:
            return load_embeddings(self.embeddings_path, vocab, self.config.embedding_dim, self.config.seed)
        return random_embeddings(vocab, self.config.embedding_dim, self.config.seed)

    def _validate(self, graphs: List[DocumentGraph], params: ModelParams, label_names: List[str]) -> Metrics:
        evaluation = evaluate_graphs(graphs, params, self.hyper, self.eval_batch_size)
        metrics = compute_metrics(evaluation.y_true, evaluation.y_pred, label_names)
        metrics.loss = evaluation.loss
        metrics.selected_edge_ratio = evaluation.selected_ratio
        metrics.selected_per_layer = evaluation.selected_per_layer
        return metrics

    def train(self, corpus: Corpus) -> Tuple[Checkpoint, List[EpochRecord]]:
        """Run all epochs and keep the parameters of the best validation epoch"""
        config = self.config
        train_docs, val_docs = self.split(corpus)
        vocab = build_vocab(Corpus(documents=train_docs + val_docs, label_names=corpus.label_names), config.min_count)
        embedding = self.embedding_table(vocab)

        train_graphs = build_graphs(train_docs, vocab, config, self.show_progress, desc="train graphs")
        val_graphs = build_graphs(val_docs, vocab, config, self.show_progress, desc="val graphs")

        params = ModelParams.initialize(embedding, corpus.num_classes, self.hyper, config.seed)
        trainable = params.trainable_names(config.train_embeddings)
        optimizer = AdamOptimizer(lr=config.lr)

        val = self._validate(val_graphs, params, corpus.label_names)
        record = EpochRecord(
            epoch=0,
            val_accuracy=val.accuracy,
            val_micro_f1=val.micro_f1,
            val_macro_f1=val.macro_f1,
            selected_ratio=val.selected_edge_ratio,
            selected_per_layer=val.selected_per_layer,
        )
        history = [record]
        logger.info(record.to_line())
        best_epoch, best_acc, best_params = 0, val.accuracy, params.copy()

        n = len(train_graphs)
        epochs = tqdm(range(1, config.epochs + 1), desc="epochs", disable=not self.show_progress)
        for epoch in epochs:
            order = np.random.default_rng([config.seed, epoch]).permutation(n)
            total_sum, pred_sum, reg_sum = 0.0, 0.0, 0.0
            for b, start in enumerate(range(0, n, config.batch_size)):
                batch = batch_graphs([train_graphs[i] for i in order[start:start + config.batch_size]])
                result = forward_document(
                    batch, params, self.hyper, training=True, seed=derive_seed(config.seed, epoch, b), trainable=trainable
                )
                grads = result.tape.gradients_by_name(result.tape.backward(result.loss))
                params = ModelParams(optimizer.step(params.tensors, grads, names=trainable))
                size = batch.num_graphs
                total_sum += result.breakdown.total * size
                pred_sum += result.breakdown.pred * size
                if result.breakdown.reg:
                    reg_sum += float(np.mean(result.breakdown.reg)) * size

            val = self._validate(val_graphs, params, corpus.label_names)
            record = EpochRecord(
                epoch=epoch,
                train_loss=total_sum / n,
                train_pred_loss=pred_sum / n,
                train_reg_loss=reg_sum / n,
                val_accuracy=val.accuracy,
                val_micro_f1=val.micro_f1,
                val_macro_f1=val.macro_f1,
                selected_ratio=val.selected_edge_ratio,
            selected_per_layer=val.selected_per_layer,
            )
            history.append(record)
            logger.info(record.to_line())
            # ties keep the earlier epoch
            if val.accuracy > best_acc:
                best_epoch, best_acc, best_params = epoch, val.accuracy, params.copy()

        logger.info(f"Selected epoch {best_epoch} with validation accuracy {best_acc:.4f}")
        checkpoint = Checkpoint(
            params=best_params,
            config=config,
            epoch=best_epoch,
            val_accuracy=best_acc,
            vocab=vocab,
            label_names=list(corpus.label_names),
        )
        return checkpoint, history


def train_model(
    config: TrainConfig,
    corpus: Corpus,
    embeddings_path: Optional[Union[str, Path]] = None,
    show_progress: Optional[bool] = None,
) -> Tuple[Checkpoint, List[EpochRecord]]:
    return TrainingService(config, embeddings_path=embeddings_path, show_progress=show_progress).train(corpus)


def evaluate_model(
    checkpoint: Checkpoint, documents: Sequence[Document], batch_size: Optional[int] = None
) -> Metrics:
    """Eval-mode metrics of a checkpoint on labelled documents"""
    if not documents:
        raise ConfigError("cannot evaluate an empty dataset")
    for doc in documents:
        if not 0 <= doc.label < checkpoint.num_classes:
            raise ConfigError(f"{doc.id}: label {doc.label} outside the model's {checkpoint.num_classes} classes")
    hyper = checkpoint.config.hyper_params()
    graphs = build_graphs(documents, checkpoint.vocab, checkpoint.config)
    evaluation = evaluate_graphs(graphs, checkpoint.params, hyper, batch_size or settings.EVAL_BATCH_SIZE)
    metrics = compute_metrics(evaluation.y_true, evaluation.y_pred, checkpoint.label_names)
    metrics.loss = evaluation.loss
    metrics.selected_edge_ratio = evaluation.selected_ratio
    metrics.selected_per_layer = evaluation.selected_per_layer
    return metrics
