"""
Embedding export: final-layer node vectors, 2-D PCA coordinates and the
learned global edges of one document
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple, Union
import logging

import numpy as np
import pandas as pd

from data_connectors.corpus_connector import CorpusConnector
from ml_models.checkpoint import Checkpoint
from ml_models.sparse_structure import ForwardResult, forward_document
from services.graph_service import DocumentGraph, assemble_document_graph
from services.text_pipeline import Document
from utils.pca import project_2d

logger = logging.getLogger(__name__)


@dataclass
class EmbeddingExport:
    doc_id: str
    nodes: pd.DataFrame
    edges: pd.DataFrame
    pca_applied: bool
    artifacts: Dict[str, str]


class EmbeddingService:
    def __init__(self, connector: Optional[CorpusConnector] = None):
        self.connector = connector or CorpusConnector()

    def cosine_similarity(self, vec1: np.ndarray, vec2: np.ndarray) -> float:
        """Calculate cosine similarity between two vectors"""
        norm1 = np.linalg.norm(vec1)
        norm2 = np.linalg.norm(vec2)
        if norm1 == 0 or norm2 == 0:
            return 0.0
        return float(np.dot(vec1, vec2) / (norm1 * norm2))

    def run_document(self, checkpoint: Checkpoint, document: Document) -> Tuple[DocumentGraph, ForwardResult]:
        """Eval-mode forward pass of one document"""
        config = checkpoint.config
        graph = assemble_document_graph(checkpoint.vocab.encode_document(document), mode=config.mode, window=config.window)
        return graph, forward_document(graph, checkpoint.params, config.hyper_params(), training=False)

    def node_table(self, checkpoint: Checkpoint, graph: DocumentGraph, hidden: np.ndarray) -> Tuple[pd.DataFrame, bool]:
        coords = project_2d(hidden)
        rows = []
        for i, (sentence, word) in enumerate(graph.nodes):
            rows.append({
                "node": i,
                "word": checkpoint.vocab.word_of(word),
                "sentence": sentence,
                "pc1": float(coords[i, 0]) if coords is not None else np.nan,
                "pc2": float(coords[i, 1]) if coords is not None else np.nan,
                "vector": " ".join(f"{x:.6g}" for x in hidden[i]),
            })
        return pd.DataFrame(rows, columns=["node", "word", "sentence", "pc1", "pc2", "vector"]), coords is not None

    def edge_table(self, checkpoint: Checkpoint, graph: DocumentGraph, result: ForwardResult) -> pd.DataFrame:
        """Learned global edges with the layer that selected them"""
        first_layer: Dict[tuple, int] = {}
        for k, edges in enumerate(result.global_edges, start=1):
            for edge in edges:
                first_layer.setdefault(edge, k)
        words = graph.word_ids
        rows = []
        for u, v in sorted(result.final_global_edges):
            rows.append({
                "u": u,
                "v": v,
                "word_u": checkpoint.vocab.word_of(int(words[u])),
                "word_v": checkpoint.vocab.word_of(int(words[v])),
                "sentence_u": int(graph.sentence_index[u]),
                "sentence_v": int(graph.sentence_index[v]),
                "layer": first_layer[(u, v)],
                "cosine": self.cosine_similarity(result.hidden[u], result.hidden[v]),
            })
        columns = ["u", "v", "word_u", "word_v", "sentence_u", "sentence_v", "layer", "cosine"]
        return pd.DataFrame(rows, columns=columns)

    def export_embeddings(
        self, checkpoint: Checkpoint, document: Document, out_dir: Union[str, Path]
    ) -> EmbeddingExport:
        """Write nodes.tsv and edges.tsv for external plotting"""
        single, result = self.run_document(checkpoint, document)
        nodes, pca_applied = self.node_table(checkpoint, single, result.hidden)
        if not pca_applied:
            logger.warning(f"Document {document.id} has {single.num_nodes} nodes; PCA skipped")
        edges = self.edge_table(checkpoint, single, result)

        out_dir = Path(out_dir)
        artifacts = {
            "nodes": str(self.connector.write_table(nodes, out_dir / f"{document.id}.nodes.tsv")),
            "edges": str(self.connector.write_table(edges, out_dir / f"{document.id}.edges.tsv")),
        }
        logger.info(f"Exported {len(nodes)} nodes and {len(edges)} global edges for {document.id}")
        return EmbeddingExport(doc_id=document.id, nodes=nodes, edges=edges, pca_applied=pca_applied, artifacts=artifacts)


def export_embeddings(
    checkpoint: Checkpoint, document: Document, out_dir: Union[str, Path]
) -> EmbeddingExport:
    return EmbeddingService().export_embeddings(checkpoint, document, out_dir)
