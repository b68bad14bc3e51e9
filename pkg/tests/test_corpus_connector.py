"""
Tests for the corpus file connector
"""
import pandas as pd
import pytest

from core.errors import ConfigError, EmptyDocument, ParseError
from data_connectors.corpus_connector import CorpusConnector


@pytest.fixture
def connector():
    return CorpusConnector()


def _write(tmp_path, text, name="corpus.tsv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_read_pre_split_and_segmented_records(connector, tmp_path):
    path = _write(
        tmp_path,
        "d1\tpos\tGreat acting\x1fWeak plot\n"
        "d2\tneg\tBoring. Too long!\ttest\n"
        "\n",
    )
    corpus = connector.read_corpus(path)
    assert corpus.label_names == ["neg", "pos"]
    d1, d2 = corpus.documents
    assert d1.sentences == (("great", "acting"), ("weak", "plot"))
    assert d1.label == 1 and d1.split == "train"
    assert d2.sentences == (("boring",), ("too", "long"))
    assert d2.label == 0 and d2.split == "test"


def test_wrong_field_count_reports_line(connector, tmp_path):
    path = _write(tmp_path, "d1\tpos\tok\nbroken line\n")
    with pytest.raises(ParseError) as exc:
        connector.read_corpus(path)
    assert exc.value.line_number == 2


def test_unknown_split_is_a_parse_error(connector, tmp_path):
    path = _write(tmp_path, "d1\tpos\tok\tdev\n")
    with pytest.raises(ParseError):
        connector.read_corpus(path)


def test_duplicate_ids_are_rejected(connector, tmp_path):
    path = _write(tmp_path, "d1\tpos\tok\nd1\tneg\tfine\n")
    with pytest.raises(ConfigError):
        connector.read_corpus(path)


def test_empty_document_raises_unless_skipped(connector, tmp_path):
    path = _write(tmp_path, "d1\tpos\tok\nd2\tneg\t!!!\n")
    with pytest.raises(EmptyDocument) as exc:
        connector.read_corpus(path)
    assert exc.value.doc_id == "d2"
    corpus = connector.read_corpus(path, skip_empty=True)
    assert [d.id for d in corpus.documents] == ["d1"]


def test_missing_file_is_a_config_error(connector, tmp_path):
    with pytest.raises(ConfigError):
        connector.read_corpus(tmp_path / "nope.tsv")


def test_write_then_read_preserves_documents(connector, tmp_path, tiny_corpus):
    path = connector.write_corpus(tiny_corpus, tmp_path / "out" / "corpus.tsv")
    again = connector.read_corpus(path)
    assert again.label_names == tiny_corpus.label_names
    assert again.documents == tiny_corpus.documents


def test_write_table_is_tab_separated(connector, tmp_path):
    path = connector.write_table(pd.DataFrame({"a": [1, 2], "b": ["x", "y"]}), tmp_path / "t.tsv")
    assert path.read_text() == "a\tb\n1\tx\n2\ty\n"


def test_write_lines(connector, tmp_path):
    path = connector.write_lines(["NODE 0 0 a", "EDGE T 0 1 2"], tmp_path / "g" / "d.graph")
    assert path.read_text().splitlines() == ["NODE 0 0 a", "EDGE T 0 1 2"]
