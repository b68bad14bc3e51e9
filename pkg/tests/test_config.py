"""
Tests for settings and training configuration loading
"""
import logging

import pytest

from core.config import Settings, load_train_config, make_train_config, read_config_file, write_config_file
from core.errors import ConfigError
from core.schemas import GraphMode, TrainConfig


def test_defaults_match_published_settings():
    config = TrainConfig()
    assert config.tau == 0.5
    assert config.threshold == 0.5
    assert config.window == 3
    assert config.embedding_dim == 300
    assert config.val_fraction == 0.1


def test_lambda_key_and_aliases():
    config = make_train_config(**{"lambda": 0.3, "layers": 3, "mode": "complete"})
    assert config.lam == 0.3
    assert config.num_layers == 3
    assert config.mode == GraphMode.COMPLETE


@pytest.mark.parametrize(
    "values",
    [{"tau": 0}, {"tau": -1.0}, {"threshold": 1.5}, {"lambda": -0.1}, {"dropout": 1.0}, {"window": 1}, {"epochs": -1}],
)
def test_invalid_values_raise_config_error(values):
    with pytest.raises(ConfigError):
        make_train_config(**values)


def test_unknown_keys_raise_config_error():
    with pytest.raises(ConfigError, match="learning_rate"):
        make_train_config(learning_rate=0.1)


def test_outside_search_space_only_warns(caplog):
    with caplog.at_level(logging.WARNING):
        config = make_train_config(hidden_dim=7)
    assert config.hidden_dim == 7
    assert "outside the reported search space" in caplog.text


def test_hyper_params_effective_threshold():
    assert make_train_config(mode="disjoint").hyper_params().effective_threshold == 1.0
    assert make_train_config(mode="complete").hyper_params().effective_threshold == 0.0
    assert make_train_config(mode="ours", threshold=0.3).hyper_params().effective_threshold == 0.3


def test_config_file_round_trip_and_overrides(tmp_path):
    path = write_config_file(make_train_config(tau=0.2, **{"lambda": 0.05}, train_embeddings=False), tmp_path / "c.txt")
    text = path.read_text()
    assert "lambda = 0.05" in text
    assert "train_embeddings = false" in text
    loaded = load_train_config(path, {"tau": 1.0, "seed": None})
    assert loaded.tau == 1.0
    assert loaded.lam == 0.05
    assert loaded.train_embeddings is False


def test_config_file_comments_and_errors(tmp_path):
    path = tmp_path / "c.txt"
    path.write_text("# tuned\nepochs = 5\nmode = disjoint\n")
    assert read_config_file(path) == {"epochs": "5", "mode": "disjoint"}
    assert load_train_config(path).epochs == 5
    with pytest.raises(ConfigError):
        load_train_config(tmp_path / "missing.txt")
    path.write_text("epochs = many\n")
    with pytest.raises(ConfigError):
        load_train_config(path)


def test_settings_read_prefixed_environment(monkeypatch):
    monkeypatch.setenv("DOCGRAPH_LOG_LEVEL", "debug")
    monkeypatch.setenv("DOCGRAPH_ABLATION_RUNS", "5")
    settings = Settings()
    assert settings.LOG_LEVEL == "DEBUG"
    assert settings.ABLATION_RUNS == 5
