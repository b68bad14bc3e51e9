"""
Graph neural network with local/global joint message passing and sparse
structure learning over inter-sentence candidate edges
"""
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union
import logging

import numpy as np

from core.errors import ConfigError, ContractViolation
from core.schemas import GraphMode, HyperParams, LossReport
from ml_models.autodiff import LOG_FLOOR, Tape, Variable, stable_softmax
from services.graph_service import BatchedGraph, DocumentGraph, Edge, batch_graphs
from utils.seeding import document_key

logger = logging.getLogger(__name__)

UNIFORM_CLAMP = 1e-12

# Pair kinds in a score table
LOCAL = 0
GLOBAL = 1
CANDIDATE = 2

GUMBEL_STREAM = 0
DROPOUT_STREAM = 1

GraphLike = Union[DocumentGraph, BatchedGraph]


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------

def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def layer_names(k: int) -> Tuple[str, str, str, str, str]:
    prefix = f"layer{k}"
    return (f"{prefix}.W1", f"{prefix}.W2", f"{prefix}.W3", f"{prefix}.W_att", f"{prefix}.a")


class ModelParams:
    """Named parameter tensors

    embedding: |V| x d0; proj.W: d0 x b; per layer k = 1..K the update
    weights layer{k}.W1/W2/W3 and the scorer layer{k}.W_att (b x b) and
    layer{k}.a (2b x 1); readout.W: b x C and readout.b: 1 x C.
    """

    def __init__(self, tensors: Dict[str, np.ndarray]):
        self.tensors: Dict[str, np.ndarray] = {name: np.asarray(v, dtype=np.float64) for name, v in tensors.items()}
        for name, value in self.tensors.items():
            if value.ndim != 2:
                raise ContractViolation(f"parameter {name!r} must be 2-D, got shape {value.shape}")
            if not np.all(np.isfinite(value)):
                raise ContractViolation(f"parameter {name!r} has non-finite entries")

    @classmethod
    def initialize(
        cls, embedding: np.ndarray, num_classes: int, hyper: HyperParams, seed: int
    ) -> "ModelParams":
        """Glorot-uniform weights, zero readout bias, embedding table as given"""
        if num_classes < 2:
            raise ConfigError(f"need at least 2 classes, got {num_classes}")
        rng = np.random.default_rng(seed)
        d0 = embedding.shape[1]
        b = hyper.hidden_dim
        tensors = {"embedding": np.array(embedding, dtype=np.float64), "proj.W": glorot_uniform(rng, d0, b)}
        for k in range(1, hyper.num_layers + 1):
            w1, w2, w3, w_att, a = layer_names(k)
            tensors[w1] = glorot_uniform(rng, b, b)
            tensors[w2] = glorot_uniform(rng, b, b)
            tensors[w3] = glorot_uniform(rng, b, b)
            tensors[w_att] = glorot_uniform(rng, b, b)
            tensors[a] = glorot_uniform(rng, 2 * b, 1)
        tensors["readout.W"] = glorot_uniform(rng, b, num_classes)
        tensors["readout.b"] = np.zeros((1, num_classes))
        return cls(tensors)

    @property
    def names(self) -> List[str]:
        return list(self.tensors)

    @property
    def num_layers(self) -> int:
        return sum(1 for name in self.tensors if name.endswith(".W1"))

    @property
    def num_classes(self) -> int:
        return int(self.tensors["readout.W"].shape[1])

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def copy(self) -> "ModelParams":
        return ModelParams({name: value.copy() for name, value in self.tensors.items()})

    def trainable_names(self, train_embeddings: bool = True) -> List[str]:
        return [name for name in self.tensors if train_embeddings or name != "embedding"]

    def bind(self, tape: Tape, trainable: Optional[Iterable[str]] = None) -> Dict[str, Variable]:
        """Record every tensor on a tape; names outside `trainable` become constants"""
        trainable = set(self.tensors) if trainable is None else set(trainable)
        return {
            name: tape.parameter(value, name=name) if name in trainable else tape.constant(value)
            for name, value in self.tensors.items()
        }


# ---------------------------------------------------------------------------
# Aggregation and update
# ---------------------------------------------------------------------------

@dataclass
class MessageGroup:
    """Weighted messages src -> dst; weight rows carry the selector gradient"""
    src: np.ndarray
    dst: np.ndarray
    weight: Variable


def local_aggregate(tape: Tape, graph: GraphLike, h: Variable) -> Variable:
    """Symmetrically normalized sum over local neighbors plus the self-loop"""
    norm = np.asarray(graph.norm, dtype=np.float64)
    if norm.size != h.rows:
        raise ContractViolation(f"local_aggregate: {norm.size} normalizers for {h.rows} nodes")
    out = tape.mul(h, tape.constant((1.0 / norm)[:, None]))
    if graph.local_src.size == 0:
        return out
    src = np.concatenate([graph.local_src, graph.local_dst])
    dst = np.concatenate([graph.local_dst, graph.local_src])
    weight = np.concatenate([graph.local_weight, graph.local_weight])
    coef = weight / np.sqrt(norm[src] * norm[dst])
    messages = tape.mul(tape.gather_rows(h, src), tape.constant(coef[:, None]))
    return tape.add(out, tape.scatter_add_rows(messages, dst, h.rows))


def global_aggregate(tape: Tape, graph: GraphLike, h: Variable, groups: Sequence[MessageGroup]) -> Variable:
    """Normalized, selector-weighted sum over current global neighbors"""
    out = None
    norm = np.asarray(graph.norm, dtype=np.float64)
    for group in groups:
        if group.src.size == 0:
            continue
        coef = 1.0 / np.sqrt(norm[group.src] * norm[group.dst])
        weight = tape.mul(group.weight, tape.constant(coef[:, None]))
        messages = tape.mul(tape.gather_rows(h, group.src), weight)
        term = tape.scatter_add_rows(messages, group.dst, h.rows)
        out = term if out is None else tape.add(out, term)
    if out is None:
        return tape.zeros(h.rows, h.cols)
    return out


def joint_update(
    tape: Tape,
    h: Variable,
    t: Variable,
    m: Optional[Variable],
    w1: Variable,
    w2: Variable,
    w3: Variable,
    mask: Optional[np.ndarray] = None,
) -> Variable:
    """ReLU(h W1 + t W2 + m W3); m=None drops the global term"""
    pre = tape.add(tape.matmul(h, w1), tape.matmul(t, w2))
    if m is not None:
        pre = tape.add(pre, tape.matmul(m, w3))
    out = tape.relu(pre)
    if mask is not None:
        out = tape.dropout(out, mask)
    return out


def dropout_mask(
    shape: Tuple[int, int],
    rate: float,
    seed: int,
    layer: int,
    graph_index: Optional[np.ndarray] = None,
    doc_ids: Optional[Sequence[str]] = None,
) -> Optional[np.ndarray]:
    """Inverted dropout mask; None when the rate is zero

    With `graph_index` and `doc_ids` the rows of each document come from that
    document's own stream, so batching does not change them.
    """
    if rate <= 0.0:
        return None
    if doc_ids is None:
        rng = np.random.default_rng([seed, layer, DROPOUT_STREAM])
        return (rng.random(shape) >= rate) / (1.0 - rate)
    uniform = np.empty(shape)
    for g, doc_id in enumerate(doc_ids):
        rows = np.flatnonzero(graph_index == g)
        rng = np.random.default_rng([seed, layer, DROPOUT_STREAM, document_key(doc_id)])
        uniform[rows] = rng.random((rows.size, shape[1]))
    return (uniform >= rate) / (1.0 - rate)


# ---------------------------------------------------------------------------
# Scoring and selection
# ---------------------------------------------------------------------------

@dataclass
class ScoreTable:
    """Directed scored pairs (v, j) with attention logits and normalized scores"""
    src: np.ndarray
    dst: np.ndarray
    kind: np.ndarray
    a_star: Variable
    s: Variable
    num_nodes: int

    @property
    def num_pairs(self) -> int:
        return int(self.src.size)

    def row_sums(self) -> np.ndarray:
        """Score mass per scoring node; nodes without pairs get 0"""
        sums = np.zeros(self.num_nodes)
        np.add.at(sums, self.src, self.s.value[:, 0])
        return sums

    def neighbors(self, v: int) -> Dict[int, float]:
        rows = np.flatnonzero(self.src == v)
        return {int(self.dst[i]): float(self.s.value[i, 0]) for i in rows}


def scored_pairs(
    graph: GraphLike, global_edges: Iterable[Edge] = (), remaining: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Directed pairs to score: local, existing global, then open candidates

    Returns (src, dst, kind, candidate_index) where candidate_index maps each
    CANDIDATE pair back to its row in the graph's candidate list. Within every
    kind, forward pairs precede backward ones.
    """
    if remaining is None:
        remaining = np.ones(graph.candidate_src.size, dtype=bool)
    glob = sorted(global_edges)
    g_src = np.array([u for u, _ in glob], dtype=np.int64)
    g_dst = np.array([v for _, v in glob], dtype=np.int64)
    open_idx = np.flatnonzero(remaining)
    c_src = graph.candidate_src[open_idx]
    c_dst = graph.candidate_dst[open_idx]

    src = np.concatenate([graph.local_src, graph.local_dst, g_src, g_dst, c_src, c_dst]).astype(np.int64)
    dst = np.concatenate([graph.local_dst, graph.local_src, g_dst, g_src, c_dst, c_src]).astype(np.int64)
    kind = np.concatenate([
        np.full(2 * graph.local_src.size, LOCAL),
        np.full(2 * g_src.size, GLOBAL),
        np.full(2 * c_src.size, CANDIDATE),
    ]).astype(np.int64)
    candidate_index = np.concatenate([open_idx, open_idx]).astype(np.int64)
    return src, dst, kind, candidate_index


def segment_softmax(tape: Tape, x: Variable, segments: np.ndarray, num_segments: int) -> Variable:
    """Softmax of a column over rows sharing a segment id"""
    seg_max = np.full(num_segments, -np.inf)
    np.maximum.at(seg_max, segments, x.value[:, 0])
    shifted = tape.add(x, tape.constant(-seg_max[segments][:, None]))
    e = tape.exp(shifted)
    log_denom = tape.log(tape.scatter_add_rows(e, segments, num_segments))
    return tape.exp(tape.add(shifted, tape.scale(tape.gather_rows(log_denom, segments), -1.0)))


def candidate_scores(
    tape: Tape,
    graph: GraphLike,
    h: Variable,
    w_att: Variable,
    a: Variable,
    global_edges: Iterable[Edge] = (),
    remaining: Optional[np.ndarray] = None,
) -> ScoreTable:
    """LeakyReLU attention logits normalized per node over all of N*(v)"""
    src, dst, kind, _ = scored_pairs(graph, global_edges, remaining)
    z = tape.matmul(h, w_att)
    pair_features = tape.concat_cols([tape.gather_rows(z, src), tape.gather_rows(z, dst)])
    a_star = tape.leaky_relu(tape.matmul(pair_features, a))
    s = segment_softmax(tape, a_star, src, h.rows) if src.size else a_star
    return ScoreTable(src=src, dst=dst, kind=kind, a_star=a_star, s=s, num_nodes=h.rows)


def gumbel_from_uniform(u: np.ndarray) -> np.ndarray:
    u = np.clip(np.asarray(u, dtype=np.float64), UNIFORM_CLAMP, 1.0 - UNIFORM_CLAMP)
    return -np.log(-np.log(u))


def sample_gumbel(shape: Tuple[int, ...], seed: Union[int, Sequence[int]]) -> np.ndarray:
    """Gumbel(0, 1) noise from a seeded generator"""
    rng = np.random.default_rng(seed)
    return gumbel_from_uniform(rng.random(shape))


def hard_threshold(p_soft: np.ndarray, threshold: float) -> np.ndarray:
    """p = [p_soft >= T]; a threshold of 1 or more never fires"""
    p_soft = np.asarray(p_soft, dtype=np.float64)
    if threshold >= 1.0:
        return np.zeros(p_soft.shape, dtype=bool)
    return p_soft >= threshold


@dataclass
class SelectorSample:
    """Per-candidate selector draws"""
    pi1: np.ndarray
    pi0: np.ndarray
    g1: np.ndarray
    g0: np.ndarray
    p_soft: np.ndarray
    p_hard: np.ndarray


def _check_tau(tau: float) -> None:
    if tau <= 0:
        raise ConfigError(f"temperature must be > 0, got {tau}")


def gumbel_select(
    pi1: Union[np.ndarray, Sequence[float]],
    tau: float,
    threshold: float,
    training: bool = True,
    seed: Union[int, Sequence[int]] = 0,
    noise: Optional[np.ndarray] = None,
) -> SelectorSample:
    """Two-way Gumbel-softmax relaxation of keep/drop with a hard threshold"""
    _check_tau(tau)
    pi1 = np.asarray(pi1, dtype=np.float64).ravel()
    pi0 = 1.0 - pi1
    if noise is None:
        noise = sample_gumbel((pi1.size, 2), seed) if training else np.zeros((pi1.size, 2))
    noise = np.asarray(noise, dtype=np.float64).reshape(pi1.size, 2)
    inv_tau = 1.0 / tau
    logits = np.stack(
        [
            (np.log(np.maximum(pi1, LOG_FLOOR)) + noise[:, 0]) * inv_tau,
            (np.log(np.maximum(pi0, LOG_FLOOR)) + noise[:, 1]) * inv_tau,
        ],
        axis=1,
    )
    p_soft = stable_softmax(logits)[:, 0] if pi1.size else np.zeros(0)
    return SelectorSample(
        pi1=pi1, pi0=pi0, g1=noise[:, 0], g0=noise[:, 1], p_soft=p_soft, p_hard=hard_threshold(p_soft, threshold)
    )


def relaxed_selector(tape: Tape, s: Variable, tau: float, noise: np.ndarray) -> Variable:
    """Tape version of the keep probability p_soft for every scored pair"""
    _check_tau(tau)
    inv_tau = 1.0 / tau
    keep = tape.scale(tape.add(tape.log(s), tape.constant(noise[:, :1])), inv_tau)
    drop = tape.scale(tape.add(tape.log(tape.constant(1.0) - s), tape.constant(noise[:, 1:])), inv_tau)
    probs = tape.row_softmax(tape.concat_cols([keep, drop]))
    return tape.matmul(probs, tape.constant([[1.0], [0.0]]))


def pair_noise(
    graph: GraphLike, src: np.ndarray, seed: int, layer: int, doc_ids: Sequence[str], training: bool
) -> np.ndarray:
    """Gumbel noise per scored pair, drawn per document so batching does not change it"""
    noise = np.zeros((src.size, 2))
    if not training or src.size == 0:
        return noise
    graph_index = getattr(graph, "graph_index", None)
    owner = np.zeros(src.size, dtype=np.int64) if graph_index is None else graph_index[src]
    for g, doc_id in enumerate(doc_ids):
        rows = np.flatnonzero(owner == g)
        if rows.size:
            noise[rows] = sample_gumbel((rows.size, 2), [seed, layer, GUMBEL_STREAM, document_key(doc_id)])
    return noise


def update_global_neighbors(
    global_edges: FrozenSet[Edge],
    candidate_src: np.ndarray,
    candidate_dst: np.ndarray,
    remaining: np.ndarray,
    fired: np.ndarray,
    local_edges: Optional[Iterable[Edge]] = None,
) -> Tuple[FrozenSet[Edge], np.ndarray]:
    """Union selected candidates into the global edge set and close them

    `fired` is a boolean mask over the candidate list; only open candidates
    may fire. Returns the new edge set and the new open-candidate mask.
    """
    fired = np.asarray(fired, dtype=bool)
    if np.any(fired & ~remaining):
        raise ContractViolation("a closed candidate cannot be selected again")
    added = {(int(min(u, v)), int(max(u, v))) for u, v in zip(candidate_src[fired], candidate_dst[fired])}
    if local_edges is not None and added & set(local_edges):
        raise ContractViolation("a local edge cannot become a global edge")
    return frozenset(global_edges) | added, remaining & ~fired


def entropy_regularizer(tape: Tape, p_local: Variable, num_graphs: int = 1) -> Variable:
    """-sum p log p over local pairs, averaged over the graphs in a batch"""
    if p_local.rows == 0:
        return tape.zeros(1, 1)
    ent = tape.sum(tape.mul(p_local, tape.log(p_local)))
    return tape.scale(ent, -1.0 / num_graphs)


def entropy_value(p: Union[np.ndarray, Sequence[float]]) -> float:
    p = np.clip(np.asarray(p, dtype=np.float64), LOG_FLOOR, 1.0)
    return float(-(p * np.log(p)).sum())


# ---------------------------------------------------------------------------
# Readout and loss
# ---------------------------------------------------------------------------

@dataclass
class LossBreakdown:
    """Prediction loss, per-layer regularizers and their weighted total"""
    pred: float
    reg: List[float] = field(default_factory=list)
    lam: float = 0.0

    @property
    def total(self) -> float:
        if not self.reg or self.lam == 0.0:
            return self.pred
        return self.pred + self.lam * float(np.mean(self.reg))

    def to_report(self) -> LossReport:
        return LossReport(pred=self.pred, reg=list(self.reg), lam=self.lam, total=self.total)


def readout(tape: Tape, h: Variable, batch: BatchedGraph, w: Variable, b: Variable, mode: str = "sum") -> Variable:
    """Pool node vectors per graph, then a linear layer"""
    pooled = tape.scatter_add_rows(h, batch.graph_index, batch.num_graphs)
    if mode == "mean":
        pooled = tape.mul(pooled, tape.constant((1.0 / batch.graph_sizes)[:, None]))
    elif mode != "sum":
        raise ContractViolation(f"unknown readout {mode!r}")
    return tape.add(tape.matmul(pooled, w), b)


def readout_and_loss(
    tape: Tape,
    h: Variable,
    batch: BatchedGraph,
    bound: Dict[str, Variable],
    lam: float = 0.0,
    regs: Sequence[Variable] = (),
    mode: str = "sum",
) -> Tuple[Variable, Variable, LossBreakdown]:
    """Logits, total loss variable and the loss breakdown"""
    logits = readout(tape, h, batch, bound["readout.W"], bound["readout.b"], mode)
    pred = tape.cross_entropy(logits, batch.labels)
    total = pred
    if regs and lam > 0.0:
        reg_sum = regs[0]
        for reg in regs[1:]:
            reg_sum = tape.add(reg_sum, reg)
        total = tape.add(pred, tape.scale(reg_sum, lam / len(regs)))
    breakdown = LossBreakdown(pred=float(pred.value[0, 0]), reg=[float(r.value[0, 0]) for r in regs], lam=lam)
    return logits, total, breakdown


# ---------------------------------------------------------------------------
# Forward pass
# ---------------------------------------------------------------------------

@dataclass
class ForwardResult:
    tape: Tape
    batch: BatchedGraph
    logits: np.ndarray
    loss: Variable
    breakdown: LossBreakdown
    global_edges: List[FrozenSet[Edge]]
    hidden: np.ndarray
    scores: List[Optional[ScoreTable]]

    @property
    def predictions(self) -> np.ndarray:
        return np.argmax(self.logits, axis=1)

    @property
    def final_global_edges(self) -> FrozenSet[Edge]:
        return self.global_edges[-1] if self.global_edges else frozenset()

    @property
    def selected_ratio(self) -> Optional[float]:
        total = self.batch.candidate_src.size
        if total == 0:
            return None
        return len(self.final_global_edges) / total

    @property
    def selected_per_layer(self) -> List[int]:
        """Size of the learned edge set after each layer"""
        return [len(edges) for edges in self.global_edges]


def _structure_layer(
    tape: Tape,
    batch: BatchedGraph,
    h: Variable,
    bound: Dict[str, Variable],
    k: int,
    hyper: HyperParams,
    global_edges: FrozenSet[Edge],
    remaining: np.ndarray,
    training: bool,
    seed: int,
    relaxed: bool,
) -> Tuple[ScoreTable, Optional[MessageGroup], Variable, FrozenSet[Edge], np.ndarray]:
    """Score, sample, select and collect the regularizer for one layer"""
    _, _, _, w_att, a = layer_names(k)
    table = candidate_scores(tape, batch, h, bound[w_att], bound[a], global_edges, remaining)
    noise = pair_noise(batch, table.src, seed, k, batch.doc_ids, training)
    p_soft = relaxed_selector(tape, table.s, hyper.tau, noise)

    local_rows = np.flatnonzero(table.kind == LOCAL)
    reg = entropy_regularizer(tape, tape.gather_rows(p_soft, local_rows), batch.num_graphs)

    cand_rows = np.flatnonzero(table.kind == CANDIDATE)
    n_open = cand_rows.size // 2
    if n_open == 0:
        return table, None, reg, global_edges, remaining

    open_idx = np.flatnonzero(remaining)
    p_cand = tape.gather_rows(p_soft, cand_rows)
    if relaxed:
        fired_fwd = np.ones(n_open, dtype=bool)
        fired_bwd = np.ones(n_open, dtype=bool)
        weights = p_cand
    else:
        hard = hard_threshold(p_cand.value[:, 0], hyper.effective_threshold)
        fired_fwd, fired_bwd = hard[:n_open], hard[n_open:]
        weights = tape.add(p_cand, tape.constant(hard[:, None] - p_cand.value))

    fired = fired_fwd | fired_bwd
    if not fired.any():
        return table, None, reg, global_edges, remaining

    fired_mask = np.zeros(remaining.size, dtype=bool)
    fired_mask[open_idx[fired]] = True
    new_edges, new_remaining = update_global_neighbors(
        global_edges, batch.candidate_src, batch.candidate_dst, remaining, fired_mask
    )

    i = np.flatnonzero(fired)
    u = batch.candidate_src[open_idx[i]]
    v = batch.candidate_dst[open_idx[i]]
    # message z -> w uses the (w, z) selector when it fired
    into_v = np.where(fired_bwd[i], n_open + i, i)
    into_u = np.where(fired_fwd[i], i, n_open + i)
    group = MessageGroup(
        src=np.concatenate([u, v]),
        dst=np.concatenate([v, u]),
        weight=tape.gather_rows(weights, np.concatenate([into_v, into_u])),
    )
    return table, group, reg, new_edges, new_remaining


def forward_document(
    graphs: Union[BatchedGraph, DocumentGraph, Sequence[DocumentGraph]],
    params: ModelParams,
    hyper: HyperParams,
    training: bool = False,
    seed: int = 0,
    relaxed: bool = False,
    tape: Optional[Tape] = None,
    bound: Optional[Dict[str, Variable]] = None,
    trainable: Optional[Iterable[str]] = None,
) -> ForwardResult:
    """Project, run K structure-learning message-passing layers, read out

    Eval mode zeroes Gumbel noise and dropout. `relaxed` keeps every open
    candidate with its soft selector weight instead of the thresholded one.
    """
    if isinstance(graphs, DocumentGraph):
        batch = batch_graphs([graphs])
    elif isinstance(graphs, BatchedGraph):
        batch = graphs
    else:
        batch = batch_graphs(list(graphs))
    if (batch.mode == GraphMode.WORDCOOC) != (hyper.mode == GraphMode.WORDCOOC):
        raise ContractViolation(f"graphs built for {batch.mode.value} cannot run in {hyper.mode.value} mode")
    _check_tau(hyper.tau)
    if params.num_layers < hyper.num_layers:
        raise ContractViolation(f"parameters have {params.num_layers} layers, hyperparameters ask for {hyper.num_layers}")

    tape = tape if tape is not None else Tape()
    if bound is None:
        bound = params.bind(tape, trainable)

    x = tape.gather_rows(bound["embedding"], batch.word_ids)
    h = tape.matmul(x, bound["proj.W"])

    global_edges: FrozenSet[Edge] = frozenset()
    remaining = np.ones(batch.candidate_src.size, dtype=bool)
    groups: List[MessageGroup] = []
    regs: List[Variable] = []
    edge_history: List[FrozenSet[Edge]] = []
    tables: List[Optional[ScoreTable]] = []
    threshold = hyper.effective_threshold
    use_reg = hyper.lam > 0.0

    for k in range(1, hyper.num_layers + 1):
        w1, w2, w3, _, _ = layer_names(k)
        table = None
        if hyper.learns_structure:
            can_select = remaining.any() and (relaxed or threshold < 1.0)
            if can_select or (use_reg and batch.local_src.size):
                table, group, reg, global_edges, remaining = _structure_layer(
                    tape, batch, h, bound, k, hyper, global_edges, remaining, training, seed, relaxed
                )
                regs.append(reg)
                if group is not None:
                    groups.append(group)
            else:
                regs.append(tape.zeros(1, 1))
        tables.append(table)
        edge_history.append(global_edges)

        t = local_aggregate(tape, batch, h)
        m = global_aggregate(tape, batch, h, groups) if groups else None
        mask = None
        if training:
            mask = dropout_mask(
                (h.rows, hyper.hidden_dim), hyper.dropout, seed, k, graph_index=batch.graph_index, doc_ids=batch.doc_ids
            )
        h = joint_update(tape, h, t, m, bound[w1], bound[w2], bound[w3], mask)

    logits, loss, breakdown = readout_and_loss(tape, h, batch, bound, hyper.lam, regs, hyper.readout)
    return ForwardResult(
        tape=tape,
        batch=batch,
        logits=logits.value.copy(),
        loss=loss,
        breakdown=breakdown,
        global_edges=edge_history,
        hidden=h.value.copy(),
        scores=tables,
    )


def predict(
    graphs: Union[BatchedGraph, Sequence[DocumentGraph]], params: ModelParams, hyper: HyperParams
) -> np.ndarray:
    """Eval-mode class predictions"""
    return forward_document(graphs, params, hyper, training=False).predictions
