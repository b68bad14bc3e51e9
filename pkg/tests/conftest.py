"""
Shared fixtures: small corpora, configurations and random document graphs
"""
import numpy as np
import pytest

from core.config import make_train_config
from core.schemas import GraphMode, HyperParams, SyntheticCorpusSpec
from ml_models.sparse_structure import ModelParams
from services.graph_service import assemble_document_graph
from services.text_pipeline import EncodedDocument, generate_synthetic_corpus


def random_encoded_document(rng: np.random.Generator, doc_id: str, max_nodes: int = 12, vocab: int = 8) -> EncodedDocument:
    """Random document of 1-3 sentences whose graph has at most max_nodes nodes"""
    num_sentences = int(rng.integers(1, 4))
    budget = max_nodes
    sentences = []
    for i in range(num_sentences):
        length = int(rng.integers(1, 6))
        tokens = tuple(int(t) for t in rng.integers(1, vocab, size=length))
        if len(set(tokens)) > budget:
            break
        budget -= len(set(tokens))
        sentences.append(tokens)
    if not sentences:
        sentences = [(1,)]
    return EncodedDocument(id=doc_id, label=int(rng.integers(2)), sentences=tuple(sentences))


def random_graph(rng: np.random.Generator, doc_id: str, mode: GraphMode = GraphMode.OURS, **kwargs):
    return assemble_document_graph(random_encoded_document(rng, doc_id, **kwargs), mode=mode)


def small_params(hyper: HyperParams, vocab: int = 8, d0: int = 4, num_classes: int = 2, seed: int = 0) -> ModelParams:
    """Parameters with O(1) embeddings so activations stay away from zero"""
    embedding = np.random.default_rng(seed + 1000).standard_normal((vocab, d0))
    return ModelParams.initialize(embedding, num_classes, hyper, seed)


@pytest.fixture
def two_sentence_doc():
    # [[a, b], [a, c]] with a=1, b=2, c=3
    return EncodedDocument(id="d0", label=1, sentences=((1, 2), (1, 3)))


@pytest.fixture
def bag_corpus():
    spec = SyntheticCorpusSpec(num_docs=200, num_classes=2, vocab_size=20, task="bag", test_fraction=0.2)
    return generate_synthetic_corpus(spec, seed=0)


@pytest.fixture
def tiny_corpus():
    spec = SyntheticCorpusSpec(num_docs=30, num_classes=2, vocab_size=12, tokens_per_sentence=4, task="bag", test_fraction=0.2)
    return generate_synthetic_corpus(spec, seed=3)


@pytest.fixture
def tiny_config():
    return make_train_config(
        hidden_dim=8,
        embedding_dim=6,
        num_layers=2,
        epochs=2,
        batch_size=8,
        lr=0.01,
        dropout=0.0,
        seed=7,
    )
