"""
Tests for ablation, temperature and training-fraction experiments
"""
import numpy as np
import pandas as pd
import pytest

from core.config import make_train_config
from core.errors import ConfigError
from core.schemas import GraphMode, Metrics, SyntheticCorpusSpec
from services.experiment_service import (
    ExperimentService,
    ablation_variants,
    subsample_training,
    summarize_runs,
)
from services.text_pipeline import Corpus, generate_synthetic_corpus


def _metrics(value):
    return Metrics(accuracy=value, micro_f1=value, macro_f1=value / 2)


@pytest.fixture
def fake_train(mocker):
    """Training stub returning a placeholder checkpoint; evaluation reports seed-dependent scores"""
    train = mocker.Mock(side_effect=lambda config, corpus, **kwargs: (config, []))
    mocker.patch(
        "services.experiment_service.evaluate_model",
        side_effect=lambda checkpoint, docs: _metrics(0.5 + 0.1 * (checkpoint.seed % 2)),
    )
    return train


def test_ablation_variants():
    variants = dict(ablation_variants(make_train_config(**{"lambda": 0.0})))
    assert list(variants) == ["WordCooc", "Disjoint", "Complete", "Ours", "Ours+reg"]
    assert variants["WordCooc"].mode == GraphMode.WORDCOOC
    assert variants["Disjoint"].hyper_params().effective_threshold == 1.0
    assert variants["Complete"].hyper_params().effective_threshold == 0.0
    assert variants["Ours"].lam == 0.0
    assert variants["Ours+reg"].lam == 0.1
    assert dict(ablation_variants(make_train_config(**{"lambda": 0.3})))["Ours+reg"].lam == 0.3


def test_ablation_table(tiny_corpus, tiny_config, fake_train):
    result = ExperimentService(runs=2, train_fn=fake_train).run_ablation(tiny_corpus, tiny_config)
    assert fake_train.call_count == 10
    assert result.table["variant"].tolist() == ["WordCooc", "Disjoint", "Complete", "Ours", "Ours+reg"]
    assert result.table["threshold"].tolist() == [0.5, 1.0, 0.0, 0.5, 0.5]
    row = result.table.iloc[0]
    # seeds 7 and 8 score 0.6 and 0.5
    assert row["accuracy_mean"] == pytest.approx(0.55)
    assert row["accuracy_std"] == pytest.approx(np.std([0.6, 0.5], ddof=1))
    assert row["runs"] == 2 and row["status"] == "ok"
    assert result.runs["seed"].tolist()[:2] == [7, 8]
    assert result.exit_code == 0


def test_temperature_sweep_rows(tiny_corpus, tiny_config, fake_train):
    result = ExperimentService(runs=1, train_fn=fake_train).run_temperature_sweep(tiny_corpus, tiny_config, [0.1, 1.0])
    assert result.table["tau"].tolist() == [0.1, 1.0]
    assert [call.args[0].tau for call in fake_train.call_args_list] == [0.1, 1.0]
    assert result.table["accuracy_std"].tolist() == [0.0, 0.0]


@pytest.mark.parametrize("taus", [[], [0.0], [0.5, -1.0]])
def test_temperature_sweep_rejects_bad_values(tiny_corpus, tiny_config, fake_train, taus):
    with pytest.raises(ConfigError):
        ExperimentService(runs=1, train_fn=fake_train).run_temperature_sweep(tiny_corpus, tiny_config, taus)


def test_fraction_sweep_sorted_and_subsampled(tiny_corpus, tiny_config, fake_train):
    result = ExperimentService(runs=1, train_fn=fake_train).run_fraction_sweep(tiny_corpus, tiny_config, [1.0, 0.5])
    assert result.table["fraction"].tolist() == [0.5, 1.0]
    sizes = [len(call.args[1].by_split("train")) for call in fake_train.call_args_list]
    assert sizes == [12, 24]


@pytest.mark.parametrize("fractions", [[0.0], [1.5]])
def test_fraction_sweep_rejects_bad_values(tiny_corpus, tiny_config, fake_train, fractions):
    with pytest.raises(ConfigError):
        ExperimentService(runs=1, train_fn=fake_train).run_fraction_sweep(tiny_corpus, tiny_config, fractions)


def test_experiments_need_a_test_split(tiny_config, fake_train):
    corpus = generate_synthetic_corpus(SyntheticCorpusSpec(num_docs=10, test_fraction=0.0), seed=0)
    with pytest.raises(ConfigError):
        ExperimentService(runs=1, train_fn=fake_train).run_ablation(corpus, tiny_config)


def test_failed_cells_are_recorded(tiny_corpus, tiny_config, mocker):
    def train(config, corpus, **kwargs):
        if config.tau == 0.2 and config.seed == 7:
            raise RuntimeError("diverged")
        return config, []

    mocker.patch("services.experiment_service.evaluate_model", return_value=_metrics(0.8))
    result = ExperimentService(runs=2, train_fn=train).run_temperature_sweep(tiny_corpus, tiny_config, [0.2, 0.5])
    assert result.failed == 1
    assert result.exit_code == 1
    failed_row = result.table.iloc[0]
    assert failed_row["status"] == "partial"
    assert failed_row["failed"] == 1
    assert failed_row["accuracy_mean"] == pytest.approx(0.8)
    assert result.table.iloc[1]["status"] == "ok"
    assert result.runs["status"].tolist() == ["failed", "ok", "ok", "ok"]


def test_summarize_runs_all_failed():
    runs = pd.DataFrame(
        [{"tau": 0.5, "run": 0, "seed": 1, "status": "failed", "accuracy": np.nan, "micro_f1": np.nan, "macro_f1": np.nan}]
    )
    table = summarize_runs(runs, ["tau"])
    assert table.iloc[0]["status"] == "failed"
    assert np.isnan(table.iloc[0]["accuracy_mean"])


def test_subsample_training_keeps_other_splits(tiny_corpus):
    small = subsample_training(tiny_corpus, 0.1, seed=0)
    assert len(small.by_split("train")) == 2
    assert small.by_split("test") == tiny_corpus.by_split("test")
    again = subsample_training(tiny_corpus, 0.1, seed=0)
    assert [d.id for d in again.by_split("train")] == [d.id for d in small.by_split("train")]
    assert isinstance(small, Corpus)


def test_runs_must_be_positive():
    with pytest.raises(ConfigError):
        ExperimentService(runs=0)
