"""
Graph service: sentence-level co-occurrence subgraphs, per-document graphs,
normalization coefficients and mini-batching
"""
from dataclasses import dataclass
from itertools import combinations
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple
import logging

import networkx as nx
import numpy as np

from core.errors import ContractViolation
from core.schemas import GraphMode
from services.text_pipeline import EncodedDocument, Vocabulary

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = 3

Edge = Tuple[int, int]


def _frozen(arr: Iterable, dtype) -> np.ndarray:
    out = np.asarray(list(arr) if not isinstance(arr, np.ndarray) else arr, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SentenceSubgraph:
    """Word co-occurrence graph of one sentence"""
    sentence_index: int
    graph: nx.Graph

    @property
    def nodes(self) -> List[int]:
        return list(self.graph.nodes)

    @property
    def edges(self) -> List[Tuple[int, int, int]]:
        """(word, word, weight) with the smaller word id first, sorted"""
        return sorted((min(u, v), max(u, v), int(d["weight"])) for u, v, d in self.graph.edges(data=True))


def build_sentence_subgraph(tokens: Sequence[int], window: int = DEFAULT_WINDOW, sentence_index: int = 0) -> SentenceSubgraph:
    """Sliding-window co-occurrence graph over the unique words of a sentence

    Every window adds 1 to the edge of each unordered pair of distinct words it
    contains. A sentence no longer than the window is a single window.
    """
    if len(tokens) == 0:
        raise ContractViolation("cannot build a subgraph from an empty sentence")
    if window < 2:
        raise ContractViolation(f"window must be >= 2, got {window}")

    graph = nx.Graph()
    graph.add_nodes_from(dict.fromkeys(int(t) for t in tokens))
    if len(tokens) <= window:
        windows = [tokens]
    else:
        windows = [tokens[i:i + window] for i in range(len(tokens) - window + 1)]
    for span in windows:
        for u, v in combinations(sorted(set(int(t) for t in span)), 2):
            if graph.has_edge(u, v):
                graph[u][v]["weight"] += 1
            else:
                graph.add_edge(u, v, weight=1)
    return SentenceSubgraph(sentence_index=sentence_index, graph=graph)


@dataclass(frozen=True)
class DocumentGraph:
    """Per-document graph with static local edges and inter-sentence candidates

    Node i is keyed by (sentence_index[i], word_ids[i]). Local and candidate
    edges are stored once with src < dst. Learned global edges are not part of
    the graph; they belong to the forward pass that selects them.
    """
    doc_id: str
    label: int
    mode: GraphMode
    sentence_index: np.ndarray
    word_ids: np.ndarray
    local_src: np.ndarray
    local_dst: np.ndarray
    local_weight: np.ndarray
    candidate_src: np.ndarray
    candidate_dst: np.ndarray
    norm: np.ndarray

    @property
    def num_nodes(self) -> int:
        return int(self.word_ids.size)

    @property
    def nodes(self) -> List[Tuple[int, int]]:
        return list(zip(self.sentence_index.tolist(), self.word_ids.tolist()))

    @property
    def local_edges(self) -> Dict[Edge, float]:
        return {(int(u), int(v)): float(w) for u, v, w in zip(self.local_src, self.local_dst, self.local_weight)}

    @property
    def candidate_edges(self) -> List[Edge]:
        return list(zip(self.candidate_src.tolist(), self.candidate_dst.tolist()))


def normalization_coefficients(
    num_nodes: int, local_src: np.ndarray, local_dst: np.ndarray, local_weight: np.ndarray
) -> np.ndarray:
    """Row sums of the self-looped local adjacency: 1 + sum of incident weights"""
    norm = np.ones(num_nodes)
    np.add.at(norm, np.asarray(local_src, dtype=np.int64), local_weight)
    np.add.at(norm, np.asarray(local_dst, dtype=np.int64), local_weight)
    return norm


def graph_normalization(graph: DocumentGraph) -> np.ndarray:
    return normalization_coefficients(graph.num_nodes, graph.local_src, graph.local_dst, graph.local_weight)


def assemble_document_graph(
    doc: EncodedDocument, mode: GraphMode = GraphMode.OURS, window: int = DEFAULT_WINDOW
) -> DocumentGraph:
    """Disjoint union of sentence subgraphs, or one merged graph in WordCooc mode"""
    mode = GraphMode(mode)
    if mode == GraphMode.WORDCOOC:
        merged = [t for sentence in doc.sentences for t in sentence]
        subgraphs = [build_sentence_subgraph(merged, window=window, sentence_index=0)]
    else:
        subgraphs = [
            build_sentence_subgraph(sentence, window=window, sentence_index=i)
            for i, sentence in enumerate(doc.sentences)
        ]

    union = nx.disjoint_union_all([sg.graph for sg in subgraphs])
    word_ids = []
    sentence_index = []
    for sg in subgraphs:
        word_ids.extend(sg.graph.nodes)
        sentence_index.extend([sg.sentence_index] * sg.graph.number_of_nodes())

    local = sorted((min(u, v), max(u, v), d["weight"]) for u, v, d in union.edges(data=True))
    local_src = np.array([e[0] for e in local], dtype=np.int64)
    local_dst = np.array([e[1] for e in local], dtype=np.int64)
    local_weight = np.array([e[2] for e in local], dtype=np.float64)

    sent = np.asarray(sentence_index, dtype=np.int64)
    iu, iv = np.triu_indices(sent.size, k=1)
    inter = sent[iu] != sent[iv]
    norm = normalization_coefficients(sent.size, local_src, local_dst, local_weight)

    return DocumentGraph(
        doc_id=doc.id,
        label=int(doc.label),
        mode=mode,
        sentence_index=_frozen(sent, np.int64),
        word_ids=_frozen(word_ids, np.int64),
        local_src=_frozen(local_src, np.int64),
        local_dst=_frozen(local_dst, np.int64),
        local_weight=_frozen(local_weight, np.float64),
        candidate_src=_frozen(iu[inter], np.int64),
        candidate_dst=_frozen(iv[inter], np.int64),
        norm=_frozen(norm, np.float64),
    )


@dataclass(frozen=True)
class BatchedGraph:
    """Block-diagonal concatenation of document graphs"""
    mode: GraphMode
    doc_ids: Tuple[str, ...]
    labels: np.ndarray
    node_offsets: np.ndarray
    local_offsets: np.ndarray
    candidate_offsets: np.ndarray
    graph_index: np.ndarray
    sentence_index: np.ndarray
    word_ids: np.ndarray
    local_src: np.ndarray
    local_dst: np.ndarray
    local_weight: np.ndarray
    candidate_src: np.ndarray
    candidate_dst: np.ndarray
    norm: np.ndarray

    @property
    def num_graphs(self) -> int:
        return len(self.doc_ids)

    @property
    def num_nodes(self) -> int:
        return int(self.word_ids.size)

    @property
    def graph_sizes(self) -> np.ndarray:
        return np.diff(self.node_offsets)


def batch_graphs(graphs: Sequence[DocumentGraph]) -> BatchedGraph:
    """Concatenate graphs, shifting node indices by cumulative offsets"""
    if not graphs:
        raise ContractViolation("cannot batch an empty list of graphs")
    modes = {g.mode for g in graphs}
    if len(modes) != 1:
        raise ContractViolation(f"graphs built in different modes: {sorted(m.value for m in modes)}")

    sizes = np.array([g.num_nodes for g in graphs], dtype=np.int64)
    node_offsets = np.concatenate([[0], np.cumsum(sizes)])
    local_offsets = np.concatenate([[0], np.cumsum([g.local_src.size for g in graphs])])
    candidate_offsets = np.concatenate([[0], np.cumsum([g.candidate_src.size for g in graphs])])

    def shifted(attr: str) -> np.ndarray:
        parts = [getattr(g, attr) + node_offsets[i] for i, g in enumerate(graphs)]
        return np.concatenate(parts).astype(np.int64)

    return BatchedGraph(
        mode=graphs[0].mode,
        doc_ids=tuple(g.doc_id for g in graphs),
        labels=np.array([g.label for g in graphs], dtype=np.int64),
        node_offsets=node_offsets.astype(np.int64),
        local_offsets=local_offsets.astype(np.int64),
        candidate_offsets=candidate_offsets.astype(np.int64),
        graph_index=np.repeat(np.arange(len(graphs)), sizes).astype(np.int64),
        sentence_index=np.concatenate([g.sentence_index for g in graphs]).astype(np.int64),
        word_ids=np.concatenate([g.word_ids for g in graphs]).astype(np.int64),
        local_src=shifted("local_src"),
        local_dst=shifted("local_dst"),
        local_weight=np.concatenate([g.local_weight for g in graphs]).astype(np.float64),
        candidate_src=shifted("candidate_src"),
        candidate_dst=shifted("candidate_dst"),
        norm=np.concatenate([g.norm for g in graphs]).astype(np.float64),
    )


def unbatch(batch: BatchedGraph) -> List[DocumentGraph]:
    """Recover the original graphs from a batch"""
    graphs = []
    for i in range(batch.num_graphs):
        n0, n1 = batch.node_offsets[i], batch.node_offsets[i + 1]
        l0, l1 = batch.local_offsets[i], batch.local_offsets[i + 1]
        c0, c1 = batch.candidate_offsets[i], batch.candidate_offsets[i + 1]
        graphs.append(
            DocumentGraph(
                doc_id=batch.doc_ids[i],
                label=int(batch.labels[i]),
                mode=batch.mode,
                sentence_index=_frozen(batch.sentence_index[n0:n1], np.int64),
                word_ids=_frozen(batch.word_ids[n0:n1], np.int64),
                local_src=_frozen(batch.local_src[l0:l1] - n0, np.int64),
                local_dst=_frozen(batch.local_dst[l0:l1] - n0, np.int64),
                local_weight=_frozen(batch.local_weight[l0:l1], np.float64),
                candidate_src=_frozen(batch.candidate_src[c0:c1] - n0, np.int64),
                candidate_dst=_frozen(batch.candidate_dst[c0:c1] - n0, np.int64),
                norm=_frozen(batch.norm[n0:n1], np.float64),
            )
        )
    return graphs


def edges_by_graph(batch: BatchedGraph, edges: Iterable[Edge]) -> List[FrozenSet[Edge]]:
    """Split batch-level undirected edges into per-graph sets of local indices"""
    buckets: List[set] = [set() for _ in range(batch.num_graphs)]
    for u, v in edges:
        g = int(batch.graph_index[u])
        if int(batch.graph_index[v]) != g:
            raise ContractViolation(f"edge ({u}, {v}) crosses graph boundaries")
        offset = int(batch.node_offsets[g])
        buckets[g].add((u - offset, v - offset))
    return [frozenset(b) for b in buckets]


def dump_graph(
    graph: DocumentGraph,
    vocab: Optional[Vocabulary] = None,
    global_edges: Iterable[Edge] = (),
) -> List[str]:
    """NODE / EDGE records for inspection and golden-file comparison"""
    lines = []
    for i, (sent, word) in enumerate(graph.nodes):
        token = vocab.word_of(word) if vocab is not None else str(word)
        lines.append(f"NODE {i} {sent} {token}")
    for (u, v), w in graph.local_edges.items():
        lines.append(f"EDGE T {u} {v} {w:g}")
    for u, v in sorted(global_edges):
        lines.append(f"EDGE M {u} {v} 1")
    for u, v in graph.candidate_edges:
        lines.append(f"EDGE C {u} {v} 0")
    return lines
