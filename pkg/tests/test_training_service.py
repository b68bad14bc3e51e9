"""
Tests for training, model selection, checkpoints and evaluation metrics
"""
from dataclasses import replace

import numpy as np
import pytest

from core.config import make_train_config
from core.errors import ConfigError
from core.schemas import EpochRecord, GraphMode
from ml_models.checkpoint import load_checkpoint, save_checkpoint
from ml_models.optim import AdamOptimizer
from ml_models.sparse_structure import ModelParams, forward_document
from services.graph_service import batch_graphs
from services.text_pipeline import Corpus, Document, build_vocab, random_embeddings
from services.training_service import TrainingService, build_graphs, compute_metrics, evaluate_model, train_model
from utils.seeding import derive_seed


def _train(config, corpus):
    return train_model(config, corpus, show_progress=False)


def test_learns_keyword_bag_task(bag_corpus):
    config = make_train_config(
        hidden_dim=16, embedding_dim=16, num_layers=2, epochs=40, batch_size=16, lr=0.01, dropout=0.0, seed=0
    )
    checkpoint, history = _train(config, bag_corpus)
    metrics = evaluate_model(checkpoint, bag_corpus.by_split("test"))
    assert metrics.accuracy >= 0.95
    assert len(history) == config.epochs + 1
    assert checkpoint.val_accuracy == max(record.val_accuracy for record in history)


def test_training_is_deterministic(tiny_corpus, tiny_config):
    first, first_history = _train(tiny_config, tiny_corpus)
    second, second_history = _train(tiny_config, tiny_corpus)
    assert first.params.names == second.params.names
    for name in first.params.names:
        np.testing.assert_array_equal(first.params[name], second.params[name])
    assert [r.to_line() for r in first_history] == [r.to_line() for r in second_history]


def test_different_seeds_give_different_parameters(tiny_corpus, tiny_config):
    first, _ = _train(tiny_config, tiny_corpus)
    second, _ = _train(tiny_config.model_copy(update={"seed": 8}), tiny_corpus)
    assert not np.array_equal(first.params["proj.W"], second.params["proj.W"])


def test_zero_learning_rate_selects_initial_epoch(tiny_corpus, tiny_config):
    config = tiny_config.model_copy(update={"lr": 0.0, "epochs": 3})
    checkpoint, history = _train(config, tiny_corpus)
    assert checkpoint.epoch == 0
    assert len({r.val_accuracy for r in history}) == 1


def test_zero_epochs_evaluates_initialization(tiny_corpus, tiny_config):
    checkpoint, history = _train(tiny_config.model_copy(update={"epochs": 0}), tiny_corpus)
    assert [r.epoch for r in history] == [0]
    assert history[0].train_loss is None
    assert checkpoint.epoch == 0


def test_history_records_losses(tiny_corpus, tiny_config):
    _, history = _train(tiny_config, tiny_corpus)
    assert [r.epoch for r in history] == [0, 1, 2]
    assert history[1].train_loss > 0
    assert history[1].train_loss == pytest.approx(history[1].train_pred_loss + tiny_config.lam * history[1].train_reg_loss)
    line = history[1].to_line()
    assert line.startswith("epoch=1 train_loss=")
    assert "val_macro_f1=" in line


def test_existing_validation_split_is_used(tiny_corpus, tiny_config):
    documents = [replace(d, split="val") if i < 5 else d for i, d in enumerate(tiny_corpus.documents)]
    corpus = Corpus(documents=documents, label_names=tiny_corpus.label_names)
    train_docs, val_docs = TrainingService(tiny_config, show_progress=False).split(corpus)
    assert val_docs == corpus.by_split("val")
    assert train_docs == corpus.by_split("train")


def test_training_without_documents_fails(tiny_config):
    corpus = Corpus(documents=[Document(id="t", label=0, sentences=(("a",),), split="test")], label_names=["x", "y"])
    with pytest.raises(ConfigError):
        _train(tiny_config, corpus)


def test_checkpoint_round_trip(tmp_path, tiny_corpus, tiny_config):
    checkpoint, _ = _train(tiny_config, tiny_corpus)
    path = save_checkpoint(checkpoint, tmp_path / "model" / "checkpoint.npz")
    assert path.name == "checkpoint.npz"
    loaded = load_checkpoint(path)
    assert loaded.config == checkpoint.config
    assert loaded.epoch == checkpoint.epoch
    assert loaded.label_names == checkpoint.label_names
    assert loaded.vocab.id_to_word == checkpoint.vocab.id_to_word
    for name in checkpoint.params.names:
        np.testing.assert_array_equal(loaded.params[name], checkpoint.params[name])
    test_docs = tiny_corpus.by_split("test")
    assert evaluate_model(loaded, test_docs) == evaluate_model(checkpoint, test_docs)


def test_bad_checkpoints_are_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_checkpoint(tmp_path / "missing.npz")
    garbage = tmp_path / "garbage.npz"
    garbage.write_bytes(b"not a checkpoint")
    with pytest.raises(ConfigError):
        load_checkpoint(garbage)


def test_evaluate_model_input_checks(tiny_corpus, tiny_config):
    checkpoint, _ = _train(tiny_config.model_copy(update={"epochs": 0}), tiny_corpus)
    with pytest.raises(ConfigError):
        evaluate_model(checkpoint, [])
    stray = Document(id="s", label=5, sentences=(("w003",),), split="test")
    with pytest.raises(ConfigError):
        evaluate_model(checkpoint, [stray])


def test_evaluation_handles_unseen_words(tiny_corpus, tiny_config):
    checkpoint, _ = _train(tiny_config.model_copy(update={"epochs": 0}), tiny_corpus)
    unseen = Document(id="u", label=1, sentences=(("never", "seen"), ("words",)), split="test")
    metrics = evaluate_model(checkpoint, [unseen])
    assert metrics.num_documents == 1


def test_compute_metrics_hand_case():
    metrics = compute_metrics([0, 0, 1, 1], [0, 1, 1, 1], ["a", "b"])
    assert metrics.accuracy == pytest.approx(0.75)
    assert metrics.micro_f1 == pytest.approx(0.75)
    assert metrics.macro_f1 == pytest.approx((2 / 3 + 0.8) / 2)
    assert [c.support for c in metrics.per_class] == [2, 2]
    assert metrics.per_class[0].precision == pytest.approx(1.0)
    assert metrics.per_class[1].recall == pytest.approx(1.0)


def test_compute_metrics_missing_class_counts_as_zero():
    metrics = compute_metrics([0, 1], [0, 1], ["a", "b", "c"])
    assert metrics.accuracy == 1.0
    assert metrics.per_class[2].f1 == 0.0
    assert metrics.macro_f1 == pytest.approx(2 / 3)
    with pytest.raises(ConfigError):
        compute_metrics([], [], ["a", "b"])


def test_epoch_record_line_skips_missing_values():
    record = EpochRecord(epoch=0, val_accuracy=0.5, val_micro_f1=0.5, val_macro_f1=0.25)
    assert record.to_line() == "epoch=0 val_accuracy=0.5 val_micro_f1=0.5 val_macro_f1=0.25"


def test_epoch_record_line_joins_lists():
    record = EpochRecord(epoch=2, val_accuracy=1.0, val_micro_f1=1.0, val_macro_f1=1.0, selected_per_layer=[3, 7])
    assert record.to_line().endswith("selected_per_layer=3,7")


def test_history_reports_selected_edges_per_layer(tiny_corpus, tiny_config):
    _, history = _train(tiny_config.model_copy(update={"mode": GraphMode.COMPLETE}), tiny_corpus)
    for record in history:
        assert len(record.selected_per_layer) == tiny_config.num_layers
        assert record.selected_per_layer[0] == record.selected_per_layer[1] > 0
        assert record.selected_ratio == 1.0


def test_fixed_batch_loss_does_not_increase_at_small_learning_rate(bag_corpus):
    config = make_train_config(lr=1e-4, dropout=0.0, seed=0)
    hyper = config.hyper_params()
    train_docs = bag_corpus.by_split("train")[:16]
    vocab = build_vocab(bag_corpus, config.min_count)
    batch = batch_graphs(build_graphs(train_docs, vocab, config))
    params = ModelParams.initialize(
        random_embeddings(vocab, config.embedding_dim, config.seed), bag_corpus.num_classes, hyper, config.seed
    )
    optimizer = AdamOptimizer(lr=config.lr)

    losses = [forward_document(batch, params, hyper, training=False).breakdown.total]
    for epoch in range(1, 6):
        result = forward_document(batch, params, hyper, training=True, seed=derive_seed(config.seed, epoch, 0))
        grads = result.tape.gradients_by_name(result.tape.backward(result.loss))
        params = ModelParams(optimizer.step(params.tensors, grads))
        losses.append(forward_document(batch, params, hyper, training=False).breakdown.total)

    assert all(later <= earlier for earlier, later in zip(losses, losses[1:]))
    assert losses[-1] < losses[0]
