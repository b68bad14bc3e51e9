"""
File connector for corpora, embedding files, result tables and graph dumps
"""
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple, Union
import logging

import numpy as np
import pandas as pd

from core.errors import ConfigError, EmptyDocument, ParseError
from services.text_pipeline import SPLITS, Corpus, Document, make_document

logger = logging.getLogger(__name__)

SENTENCE_SEPARATOR = "\x1f"
FIELD_SEPARATOR = "\t"

PathLike = Union[str, Path]


class CorpusConnector:
    """Reads and writes the line-delimited corpus format and related artifacts

    Corpus record: <id> TAB <label> TAB <sentence>\\x1F<sentence>... [TAB <split>]
    A record without \\x1F is run through the sentence segmenter.
    """

    def __init__(self, encoding: str = "utf-8"):
        self.encoding = encoding

    def read_corpus(self, path: PathLike, skip_empty: bool = False) -> Corpus:
        """Load a corpus; labels are indexed in sorted label-string order"""
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"corpus file not found: {path}")

        records: List[Tuple[str, str, str, str]] = []
        with open(path, "r", encoding=self.encoding) as fh:
            for line_number, line in enumerate(fh, start=1):
                line = line.rstrip("\n").rstrip("\r")
                if not line.strip():
                    continue
                fields = line.split(FIELD_SEPARATOR)
                if len(fields) not in (3, 4):
                    raise ParseError(
                        f"expected 3 or 4 tab-separated fields, got {len(fields)}",
                        line_number=line_number,
                        path=str(path),
                    )
                doc_id, label, text = fields[0].strip(), fields[1].strip(), fields[2]
                split = fields[3].strip() if len(fields) == 4 else "train"
                if not doc_id or not label:
                    raise ParseError("empty document id or label", line_number=line_number, path=str(path))
                if split not in SPLITS:
                    raise ParseError(f"unknown split tag {split!r}", line_number=line_number, path=str(path))
                records.append((doc_id, label, text, split))

        label_names = sorted({label for _, label, _, _ in records})
        label_index = {name: i for i, name in enumerate(label_names)}
        documents: List[Document] = []
        seen = set()
        for doc_id, label, text, split in records:
            if doc_id in seen:
                raise ConfigError(f"{path}: duplicate document id {doc_id!r}")
            seen.add(doc_id)
            payload = text.split(SENTENCE_SEPARATOR) if SENTENCE_SEPARATOR in text else text
            try:
                documents.append(make_document(doc_id, label_index[label], payload, split=split))
            except EmptyDocument as e:
                if not skip_empty:
                    raise EmptyDocument(doc_id) from e
                logger.warning(f"Skipping empty document {doc_id} in {path}")

        logger.info(f"Read {len(documents)} documents with {len(label_names)} classes from {path}")
        return Corpus(documents=documents, label_names=label_names)

    def write_corpus(self, corpus: Corpus, path: PathLike) -> Path:
        """Write a corpus with pre-split sentences and explicit split tags"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding=self.encoding, newline="\n") as fh:
            for doc in corpus.documents:
                text = SENTENCE_SEPARATOR.join(" ".join(sentence) for sentence in doc.sentences)
                label = corpus.label_names[doc.label]
                fh.write(FIELD_SEPARATOR.join([doc.id, label, text, doc.split]) + "\n")
        return path

    def iter_embedding_records(self, path: PathLike) -> Iterator[Tuple[int, str, np.ndarray]]:
        """Yield (line number, word, vector) from a GloVe-style text file"""
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"embedding file not found: {path}")
        width: Optional[int] = None
        with open(path, "r", encoding=self.encoding) as fh:
            for line_number, line in enumerate(fh, start=1):
                parts = line.split()
                if not parts:
                    continue
                if len(parts) < 2:
                    raise ParseError("expected a word followed by a vector", line_number=line_number, path=str(path))
                if width is None:
                    width = len(parts)
                elif len(parts) != width:
                    raise ParseError(
                        f"expected {width - 1} values, got {len(parts) - 1}",
                        line_number=line_number,
                        path=str(path),
                    )
                try:
                    vector = np.array([float(x) for x in parts[1:]], dtype=np.float64)
                except ValueError:
                    raise ParseError("non-numeric vector entry", line_number=line_number, path=str(path))
                if not np.all(np.isfinite(vector)):
                    raise ParseError("non-finite vector entry", line_number=line_number, path=str(path))
                yield line_number, parts[0], vector

    def write_table(self, table: pd.DataFrame, path: PathLike) -> Path:
        """Header line plus tab-separated rows"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(path, sep=FIELD_SEPARATOR, index=False, lineterminator="\n")
        return path

    def write_lines(self, lines: Sequence[str], path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding=self.encoding, newline="\n") as fh:
            for line in lines:
                fh.write(line + "\n")
        return path
