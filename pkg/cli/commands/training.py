"""
Model commands: train, eval, export-embeddings
"""
import argparse
import logging

import pandas as pd

from core.config import write_config_file
from core.schemas import CommandResult
from cli.commands.common import (
    add_config_arguments,
    add_io_arguments,
    config_from_args,
    get_connector,
    output_dir,
    read_corpus,
)
from ml_models.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from services.embedding_service import EmbeddingService
from services.text_pipeline import SPLITS, Corpus
from services.training_service import evaluate_model, train_model

logger = logging.getLogger(__name__)

# Services will be initialized lazily
_embedding_service = None


def get_embedding_service() -> EmbeddingService:
    global _embedding_service
    if _embedding_service is None:
        _embedding_service = EmbeddingService(get_connector())
    return _embedding_service


def register(subparsers) -> None:
    train = subparsers.add_parser("train", help="train one model and keep the best validation epoch")
    add_io_arguments(train)
    add_config_arguments(train)
    train.set_defaults(handler=train_command)

    evaluate = subparsers.add_parser("eval", help="evaluate a checkpoint on a corpus split")
    add_io_arguments(evaluate)
    evaluate.add_argument("--checkpoint", required=True)
    evaluate.add_argument("--split", choices=list(SPLITS) + ["all"], default="test")
    evaluate.set_defaults(handler=eval_command)

    export = subparsers.add_parser("export-embeddings", help="export node vectors, PCA coordinates and global edges")
    add_io_arguments(export)
    export.add_argument("--checkpoint", required=True)
    export.add_argument("--doc-id", required=True)
    export.set_defaults(handler=export_command)


def _corpus_for(checkpoint: Checkpoint, args: argparse.Namespace) -> Corpus:
    return read_corpus(args).relabel(checkpoint.label_names)


def train_command(args: argparse.Namespace) -> CommandResult:
    config = config_from_args(args)
    corpus = read_corpus(args)
    out = output_dir(args)
    checkpoint, history = train_model(config, corpus, embeddings_path=args.embeddings)

    connector = get_connector()
    artifacts = {
        "checkpoint": str(save_checkpoint(checkpoint, out / "checkpoint.npz")),
        "metrics_log": str(connector.write_lines([record.to_line() for record in history], out / "metrics.log")),
        "config": str(write_config_file(config, out / "config.txt")),
    }
    summary = {
        "best_epoch": checkpoint.epoch,
        "val_accuracy": checkpoint.val_accuracy,
        "epochs_run": len(history) - 1,
    }
    test_docs = corpus.by_split("test")
    if test_docs:
        metrics = evaluate_model(checkpoint, test_docs)
        summary["test"] = metrics.model_dump(exclude={"per_class"})
    return CommandResult(command=args.command, summary=summary, artifacts=artifacts)


def eval_command(args: argparse.Namespace) -> CommandResult:
    checkpoint = load_checkpoint(args.checkpoint)
    corpus = _corpus_for(checkpoint, args)
    documents = corpus.documents if args.split == "all" else corpus.by_split(args.split)
    metrics = evaluate_model(checkpoint, documents)
    artifacts = {}
    if args.out:
        per_class = pd.DataFrame([c.model_dump() for c in metrics.per_class])
        artifacts["per_class"] = str(get_connector().write_table(per_class, output_dir(args) / "per_class.tsv"))
    return CommandResult(command=args.command, summary=metrics.model_dump(), artifacts=artifacts)


def export_command(args: argparse.Namespace) -> CommandResult:
    checkpoint = load_checkpoint(args.checkpoint)
    document = _corpus_for(checkpoint, args).find(args.doc_id)
    export = get_embedding_service().export_embeddings(checkpoint, document, output_dir(args))
    return CommandResult(
        command=args.command,
        summary={
            "doc_id": export.doc_id,
            "nodes": len(export.nodes),
            "global_edges": len(export.edges),
            "pca_applied": export.pca_applied,
        },
        artifacts=export.artifacts,
    )
