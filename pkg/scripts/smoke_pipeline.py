#!/usr/bin/env python3
"""
Smoke test for the end-to-end pipeline on a small synthetic corpus
"""
import sys
import os
import tempfile

# Add the project root to the Python path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.config import make_train_config
from core.schemas import GraphMode, SyntheticCorpusSpec
from services.embedding_service import EmbeddingService
from services.experiment_service import ExperimentService
from services.text_pipeline import corpus_statistics, generate_synthetic_corpus
from services.training_service import evaluate_model, train_model


def smoke_corpus():
    """Generate the bag corpus and print its statistics"""
    print("📚 Generating synthetic corpus...")
    corpus = generate_synthetic_corpus(SyntheticCorpusSpec(num_docs=200, task="bag"), seed=0)
    stats = corpus_statistics(corpus)
    print(f"✅ {stats.num_docs} documents, {stats.num_classes} classes, vocabulary of {stats.vocab_size}")
    return corpus


def smoke_training(corpus):
    """Train one model per graph mode and report test accuracy"""
    print("\n🧠 Training one model per graph mode...")
    checkpoints = {}
    for mode in GraphMode:
        try:
            config = make_train_config(
                mode=mode, hidden_dim=16, embedding_dim=16, epochs=20, lr=0.01, dropout=0.0, seed=0
            )
            checkpoint, history = train_model(config, corpus, show_progress=False)
            metrics = evaluate_model(checkpoint, corpus.by_split("test"))
            print(f"   {mode.value:<9} best epoch {checkpoint.epoch:>3}  test accuracy {metrics.accuracy:.3f}")
            checkpoints[mode] = checkpoint
        except Exception as e:
            print(f"❌ {mode.value} failed: {str(e)}")
    return checkpoints


def smoke_export(corpus, checkpoint):
    """Export node embeddings for the first test document"""
    print("\n📤 Exporting node embeddings...")
    document = corpus.by_split("test")[0]
    with tempfile.TemporaryDirectory() as out_dir:
        export = EmbeddingService().export_embeddings(checkpoint, document, out_dir)
        print(f"✅ {document.id}: {len(export.nodes)} nodes, {len(export.edges)} global edges")
        if not export.pca_applied:
            print("⚠️  Too few nodes for PCA coordinates")


def smoke_ablation(corpus):
    """Single-run ablation table"""
    print("\n📊 Running a single-seed ablation...")
    base = make_train_config(hidden_dim=16, embedding_dim=16, epochs=10, lr=0.01, seed=0)
    result = ExperimentService(runs=1).run_ablation(corpus, base)
    print(result.table[["variant", "accuracy_mean", "macro_f1_mean", "status"]].to_string(index=False))


def main():
    print("🚀 DocGraph pipeline smoke test\n")
    corpus = smoke_corpus()
    checkpoints = smoke_training(corpus)
    if GraphMode.OURS in checkpoints:
        smoke_export(corpus, checkpoints[GraphMode.OURS])
    smoke_ablation(corpus)
    print("\n🎉 Done")
    return 0 if len(checkpoints) == len(GraphMode) else 1


if __name__ == "__main__":
    sys.exit(main())
