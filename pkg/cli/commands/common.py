"""
Flags and helpers shared by command modules
"""
import argparse
from pathlib import Path
from typing import Any, Dict, List, Optional

from core.config import load_train_config, settings
from core.errors import ConfigError
from core.schemas import GraphMode, TrainConfig
from data_connectors.corpus_connector import CorpusConnector
from services.text_pipeline import Corpus

# Connector is created lazily
_connector = None


def get_connector() -> CorpusConnector:
    global _connector
    if _connector is None:
        _connector = CorpusConnector()
    return _connector


def add_io_arguments(parser: argparse.ArgumentParser, corpus_required: bool = True) -> None:
    parser.add_argument("--corpus", required=corpus_required, help="corpus file (id TAB label TAB text [TAB split])")
    parser.add_argument("--out", help=f"output directory (default {settings.OUTPUT_DIR}/<command>)")


def add_config_arguments(parser: argparse.ArgumentParser) -> None:
    """Training configuration flags; each overrides the --config file value"""
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument("--embeddings", help="word vector file (word v1 ... vd per line)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--mode", choices=[m.value for m in GraphMode])
    parser.add_argument("--tau", type=float)
    parser.add_argument("--threshold", type=float)
    parser.add_argument("--lambda", dest="lam", type=float)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--hidden-dim", type=int)
    parser.add_argument("--embedding-dim", type=int)
    parser.add_argument("--layers", type=int)
    parser.add_argument("--lr", type=float)
    parser.add_argument("--dropout", type=float)
    parser.add_argument("--batch-size", type=int)
    parser.add_argument("--window", type=int)
    parser.add_argument("--readout", choices=["sum", "mean"])


def config_from_args(args: argparse.Namespace) -> TrainConfig:
    overrides: Dict[str, Any] = {
        "seed": args.seed,
        "mode": args.mode,
        "tau": args.tau,
        "threshold": args.threshold,
        "lam": args.lam,
        "epochs": args.epochs,
        "hidden_dim": args.hidden_dim,
        "embedding_dim": args.embedding_dim,
        "num_layers": args.layers,
        "lr": args.lr,
        "dropout": args.dropout,
        "batch_size": args.batch_size,
        "window": args.window,
        "readout": args.readout,
    }
    return load_train_config(args.config, overrides)


def output_dir(args: argparse.Namespace) -> Path:
    path = Path(args.out) if args.out else Path(settings.OUTPUT_DIR) / args.command
    path.mkdir(parents=True, exist_ok=True)
    return path


def read_corpus(args: argparse.Namespace) -> Corpus:
    return get_connector().read_corpus(args.corpus, skip_empty=getattr(args, "skip_empty", False))


def parse_floats(text: Optional[str], flag: str) -> Optional[List[float]]:
    """Comma-separated list of numbers"""
    if text is None:
        return None
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"{flag} expects comma-separated numbers, got {text!r}")
