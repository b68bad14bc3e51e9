"""
Data commands: preprocess, gen-synthetic, stats
"""
import argparse
import logging

import pandas as pd

from core.config import settings
from core.schemas import CommandResult, GraphMode, SyntheticCorpusSpec
from cli.commands.common import add_io_arguments, get_connector, output_dir, read_corpus
from services.graph_service import DEFAULT_WINDOW, assemble_document_graph, dump_graph
from services.text_pipeline import build_vocab, corpus_statistics, generate_synthetic_corpus

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    preprocess = subparsers.add_parser("preprocess", help="normalize a corpus, build the vocabulary and graphs")
    add_io_arguments(preprocess)
    preprocess.add_argument("--min-count", type=int, default=1)
    preprocess.add_argument("--window", type=int, default=DEFAULT_WINDOW)
    preprocess.add_argument("--mode", choices=[m.value for m in GraphMode], default=GraphMode.OURS.value)
    preprocess.add_argument("--dump-graphs", action="store_true", help="write one NODE/EDGE dump per document")
    preprocess.add_argument("--skip-empty", action="store_true", help="skip documents without tokens")
    preprocess.set_defaults(handler=preprocess_command)

    synthetic = subparsers.add_parser("gen-synthetic", help="generate a seeded synthetic corpus")
    synthetic.add_argument("--out", help=f"output directory (default {settings.OUTPUT_DIR}/gen-synthetic)")
    synthetic.add_argument("--task", choices=["bag", "cross_sentence_xor"], default="bag")
    synthetic.add_argument("--num-docs", type=int, default=200)
    synthetic.add_argument("--num-classes", type=int, default=2)
    synthetic.add_argument("--vocab-size", type=int, default=20)
    synthetic.add_argument("--sentences", type=int, default=2)
    synthetic.add_argument("--tokens", type=int, default=5)
    synthetic.add_argument("--test-fraction", type=float, default=0.2)
    synthetic.add_argument("--seed", type=int, default=settings.DEFAULT_SEED)
    synthetic.set_defaults(handler=gen_synthetic_command)

    stats = subparsers.add_parser("stats", help="corpus statistics table")
    add_io_arguments(stats)
    stats.add_argument("--min-count", type=int, default=1)
    stats.set_defaults(handler=stats_command)


def preprocess_command(args: argparse.Namespace) -> CommandResult:
    connector = get_connector()
    corpus = read_corpus(args)
    out = output_dir(args)
    vocab = build_vocab(corpus, min_count=args.min_count)
    stats = corpus_statistics(corpus, min_count=args.min_count)

    vocab_table = pd.DataFrame({"id": range(len(vocab)), "word": vocab.id_to_word, "count": vocab.counts})
    artifacts = {
        "corpus": str(connector.write_corpus(corpus, out / "corpus.tsv")),
        "vocab": str(connector.write_table(vocab_table, out / "vocab.tsv")),
        "stats": str(connector.write_table(pd.DataFrame([stats.model_dump()]), out / "stats.tsv")),
    }

    num_nodes, num_local, num_candidates = 0, 0, 0
    graph_dir = out / "graphs"
    for doc in corpus.documents:
        graph = assemble_document_graph(vocab.encode_document(doc), mode=GraphMode(args.mode), window=args.window)
        num_nodes += graph.num_nodes
        num_local += graph.local_src.size
        num_candidates += graph.candidate_src.size
        if args.dump_graphs:
            connector.write_lines(dump_graph(graph, vocab), graph_dir / f"{doc.id}.graph")
    if args.dump_graphs:
        artifacts["graphs"] = str(graph_dir)

    logger.info(f"Preprocessed {len(corpus.documents)} documents into {out}")
    return CommandResult(
        command=args.command,
        summary={
            "stats": stats.model_dump(),
            "vocab_size": len(vocab),
            "nodes": num_nodes,
            "local_edges": num_local,
            "candidate_edges": num_candidates,
        },
        artifacts=artifacts,
    )


def gen_synthetic_command(args: argparse.Namespace) -> CommandResult:
    spec = SyntheticCorpusSpec(
        num_docs=args.num_docs,
        num_classes=args.num_classes,
        vocab_size=args.vocab_size,
        sentences_per_doc=args.sentences,
        tokens_per_sentence=args.tokens,
        task=args.task,
        test_fraction=args.test_fraction,
    )
    corpus = generate_synthetic_corpus(spec, seed=args.seed)
    path = get_connector().write_corpus(corpus, output_dir(args) / f"{args.task}.tsv")
    return CommandResult(
        command=args.command,
        summary={"spec": spec.model_dump(), "seed": args.seed, "documents": len(corpus.documents)},
        artifacts={"corpus": str(path)},
    )


def stats_command(args: argparse.Namespace) -> CommandResult:
    corpus = read_corpus(args)
    stats = corpus_statistics(corpus, min_count=args.min_count)
    artifacts = {}
    if args.out:
        table = pd.DataFrame([stats.model_dump()])
        artifacts["stats"] = str(get_connector().write_table(table, output_dir(args) / "stats.tsv"))
    return CommandResult(command=args.command, summary=stats.model_dump(), artifacts=artifacts)
