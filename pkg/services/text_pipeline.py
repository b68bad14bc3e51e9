"""
Text pipeline: sentence segmentation, tokenization, vocabulary, embeddings,
train/validation splitting and synthetic corpora
"""
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union
import logging
import math
import re
import string

import numpy as np

from core.errors import ConfigError, EmptyDocument
from core.schemas import CorpusStats, SyntheticCorpusSpec

logger = logging.getLogger(__name__)

OOV_TOKEN = "<unk>"
OOV_ID = 0
SPLITS = ("train", "val", "test")
EMBEDDING_INIT_SCALE = 0.01

_SENTENCE_BREAK = re.compile(r"(?<=[.!?])\s+")
_PUNCTUATION = string.punctuation + "“”‘’«»…–—"


@dataclass(frozen=True)
class Document:
    """A labelled document as sentences of lowercase tokens"""
    id: str
    label: int
    sentences: Tuple[Tuple[str, ...], ...]
    split: str = "train"

    @property
    def num_tokens(self) -> int:
        return sum(len(s) for s in self.sentences)


@dataclass(frozen=True)
class EncodedDocument:
    """A document whose tokens are vocabulary ids"""
    id: str
    label: int
    sentences: Tuple[Tuple[int, ...], ...]


@dataclass
class Corpus:
    """Documents with dense class indices and split tags"""
    documents: List[Document]
    label_names: List[str]

    def __post_init__(self):
        for doc in self.documents:
            if not 0 <= doc.label < len(self.label_names):
                raise ConfigError(f"{doc.id}: label {doc.label} outside [0, {len(self.label_names)})")
            if doc.split not in SPLITS:
                raise ConfigError(f"{doc.id}: unknown split tag {doc.split!r}")

    @property
    def num_classes(self) -> int:
        return len(self.label_names)

    def by_split(self, split: str) -> List[Document]:
        return [doc for doc in self.documents if doc.split == split]

    def find(self, doc_id: str) -> Document:
        for doc in self.documents:
            if doc.id == doc_id:
                return doc
        raise ConfigError(f"document {doc_id!r} not found in corpus")

    def relabel(self, label_names: Sequence[str]) -> "Corpus":
        """Map class indices onto another label order (e.g. a checkpoint's)"""
        target = {name: i for i, name in enumerate(label_names)}
        unknown = sorted(set(self.label_names) - set(target))
        if unknown:
            raise ConfigError(f"labels not known to the model: {', '.join(unknown)}")
        documents = [replace(doc, label=target[self.label_names[doc.label]]) for doc in self.documents]
        return Corpus(documents=documents, label_names=list(label_names))


class Vocabulary:
    """Bijective word <-> id map with a reserved OOV id"""

    def __init__(self, words: Sequence[str], counts: Optional[Sequence[int]] = None):
        if not words or words[0] != OOV_TOKEN:
            raise ConfigError(f"vocabulary must start with {OOV_TOKEN}")
        self.id_to_word: List[str] = list(words)
        self.word_to_id: Dict[str, int] = {w: i for i, w in enumerate(self.id_to_word)}
        if len(self.word_to_id) != len(self.id_to_word):
            raise ConfigError("vocabulary contains duplicate words")
        self.counts: List[int] = list(counts) if counts is not None else [0] * len(words)

    def __len__(self) -> int:
        return len(self.id_to_word)

    def __contains__(self, word: str) -> bool:
        return word in self.word_to_id

    def id_of(self, word: str) -> int:
        return self.word_to_id.get(word, OOV_ID)

    def word_of(self, index: int) -> str:
        return self.id_to_word[index]

    def encode_document(self, doc: Document) -> EncodedDocument:
        return EncodedDocument(
            id=doc.id,
            label=doc.label,
            sentences=tuple(tuple(self.id_of(tok) for tok in sentence) for sentence in doc.sentences),
        )


def segment_sentences(raw_text: str) -> List[str]:
    """Split after `.`, `!` or `?` followed by whitespace"""
    if raw_text is None or not raw_text.strip():
        raise EmptyDocument(message="empty or whitespace-only text")
    parts = [part.strip() for part in _SENTENCE_BREAK.split(raw_text.strip())]
    return [part for part in parts if part]


def tokenize(sentence: str) -> List[str]:
    """Lowercase whitespace tokens with boundary punctuation stripped"""
    tokens = []
    for raw in sentence.lower().split():
        token = raw.strip(_PUNCTUATION)
        if token and any(ch.isalnum() for ch in token):
            tokens.append(token)
    return tokens


def make_document(doc_id: str, label: int, text: Union[str, Sequence[str]], split: str = "train") -> Document:
    """Segment (unless pre-split) and tokenize raw text into a Document"""
    sentences = segment_sentences(text) if isinstance(text, str) else list(text)
    tokenized = tuple(tuple(toks) for toks in (tokenize(s) for s in sentences) if toks)
    if not tokenized:
        raise EmptyDocument(doc_id)
    return Document(id=doc_id, label=label, sentences=tokenized, split=split)


def build_vocab(corpus: Corpus, min_count: int = 1) -> Vocabulary:
    """Vocabulary of training-split words with frequency >= min_count"""
    counts: Counter = Counter()
    for doc in corpus.by_split("train"):
        for sentence in doc.sentences:
            counts.update(sentence)
    kept = [(w, c) for w, c in counts.items() if c >= min_count]
    kept.sort(key=lambda item: (-item[1], item[0]))
    words = [OOV_TOKEN] + [w for w, _ in kept]
    freqs = [0] + [c for _, c in kept]
    logger.info(f"Built vocabulary: {len(words)} ids ({len(counts)} training word types, min_count={min_count})")
    return Vocabulary(words, freqs)


def random_embeddings(vocab: Vocabulary, d0: int, seed: int) -> np.ndarray:
    """Uniform [-0.01, 0.01] table from a seeded generator"""
    if d0 < 1:
        raise ConfigError(f"embedding dimension must be >= 1, got {d0}")
    rng = np.random.default_rng(seed)
    return rng.uniform(-EMBEDDING_INIT_SCALE, EMBEDDING_INIT_SCALE, size=(len(vocab), d0))


def load_embeddings(path: Union[str, Path], vocab: Vocabulary, d0: int, seed: int) -> np.ndarray:
    """Embedding table with file vectors for known words and random rows elsewhere"""
    from data_connectors.corpus_connector import CorpusConnector

    table = random_embeddings(vocab, d0, seed)
    found = 0
    for line_number, word, vector in CorpusConnector().iter_embedding_records(path):
        if vector.size != d0:
            raise ConfigError(f"{path}:{line_number}: embedding dimension {vector.size} != configured {d0}")
        index = vocab.word_to_id.get(word)
        if index is None or index == OOV_ID:
            continue
        table[index] = vector
        found += 1
    logger.info(f"Loaded {found} of {len(vocab) - 1} vocabulary vectors from {path}")
    return table


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_train_val(
    train_docs: Sequence[Document], fraction: float = 0.1, seed: int = 42
) -> Tuple[List[Document], List[Document]]:
    """Seeded random hold-out of a validation subset"""
    n = len(train_docs)
    if n < 2:
        raise ConfigError(f"need at least 2 training documents to split, got {n}")
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"validation fraction must lie in (0, 1), got {fraction}")
    n_val = min(max(_round_half_up(fraction * n), 1), n - 1)
    order = np.random.default_rng(seed).permutation(n)
    val_idx = set(order[:n_val].tolist())
    train = [replace(d, split="train") for i, d in enumerate(train_docs) if i not in val_idx]
    val = [replace(d, split="val") for i, d in enumerate(train_docs) if i in val_idx]
    return train, val


def _synthetic_word(index: int) -> str:
    return f"w{index:03d}"


def generate_synthetic_corpus(spec: SyntheticCorpusSpec, seed: int) -> Corpus:
    """Seeded desk-scale corpus for the `bag` and `cross_sentence_xor` tasks"""
    if spec.vocab_size < 10:
        raise ConfigError(f"vocab_size must be >= 10, got {spec.vocab_size}")
    if spec.num_docs < 1 or spec.sentences_per_doc < 1 or spec.tokens_per_sentence < 1:
        raise ConfigError("num_docs, sentences_per_doc and tokens_per_sentence must be >= 1")
    if not 0.0 <= spec.test_fraction < 1.0:
        raise ConfigError(f"test_fraction must lie in [0, 1), got {spec.test_fraction}")
    if spec.task == "bag":
        if spec.num_classes < 2 or spec.num_classes >= spec.vocab_size:
            raise ConfigError("bag task needs 2 <= num_classes < vocab_size")
        num_markers = spec.num_classes
    else:
        if spec.num_classes != 2:
            raise ConfigError("cross_sentence_xor requires num_classes = 2")
        if spec.sentences_per_doc < 2:
            raise ConfigError("cross_sentence_xor requires sentences_per_doc >= 2")
        num_markers = 2

    rng = np.random.default_rng(seed)
    fillers = np.arange(num_markers, spec.vocab_size)
    documents = []
    for i in range(spec.num_docs):
        body = rng.choice(fillers, size=(spec.sentences_per_doc, spec.tokens_per_sentence))
        sentences = [[_synthetic_word(int(w)) for w in row] for row in body]
        if spec.task == "bag":
            label = int(rng.integers(spec.num_classes))
            s = int(rng.integers(spec.sentences_per_doc))
            p = int(rng.integers(spec.tokens_per_sentence))
            sentences[s][p] = _synthetic_word(label)
        else:
            has_x = bool(rng.random() < 0.5)
            has_y = bool(rng.random() < 0.5)
            if has_x:
                sentences[0][int(rng.integers(spec.tokens_per_sentence))] = _synthetic_word(0)
            if has_y:
                sentences[1][int(rng.integers(spec.tokens_per_sentence))] = _synthetic_word(1)
            label = int(has_x != has_y)
        documents.append(
            Document(id=f"syn-{i:05d}", label=label, sentences=tuple(tuple(s) for s in sentences))
        )

    n_test = _round_half_up(spec.test_fraction * spec.num_docs)
    test_idx = set(rng.permutation(spec.num_docs)[:n_test].tolist())
    documents = [replace(d, split="test") if i in test_idx else d for i, d in enumerate(documents)]
    label_names = [f"c{c:02d}" for c in range(spec.num_classes)]
    logger.info(f"Generated {spec.task} corpus: {spec.num_docs} documents, {n_test} held out for test")
    return Corpus(documents=documents, label_names=label_names)


def corpus_statistics(corpus: Corpus, min_count: int = 1) -> CorpusStats:
    """Summary statistics: sizes, lengths, imbalance ratio and unseen test words"""
    docs = corpus.documents
    if not docs:
        raise ConfigError("corpus is empty")
    vocab = build_vocab(corpus, min_count=min_count)
    class_sizes = np.bincount([d.label for d in docs], minlength=corpus.num_classes)
    present = class_sizes[class_sizes > 0]
    test_words = {w for d in corpus.by_split("test") for s in d.sentences for w in s}
    unseen = sum(1 for w in test_words if w not in vocab)
    return CorpusStats(
        num_docs=len(docs),
        num_train=len(corpus.by_split("train")),
        num_val=len(corpus.by_split("val")),
        num_test=len(corpus.by_split("test")),
        num_classes=corpus.num_classes,
        vocab_size=len(vocab) - 1,
        avg_length=float(np.mean([d.num_tokens for d in docs])),
        avg_sentences=float(np.mean([len(d.sentences) for d in docs])),
        imbalance_ratio=float(present.max() / present.min()),
        prop_new_words=float(unseen / len(test_words)) if test_words else 0.0,
    )
