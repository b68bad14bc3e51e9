"""
Reverse-mode differentiation over dense 2-D float64 arrays

Values are plain numpy arrays of shape (rows, cols). A Tape records every
primitive application in execution order; backpropagation walks the tape once
in reverse. Graph sparsity is expressed through gather_rows and
scatter_add_rows instead of sparse matrices.
"""
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union
import logging

import numpy as np

from core.errors import ContractViolation

logger = logging.getLogger(__name__)

LEAKY_RELU_SLOPE = 0.2
LOG_FLOOR = 1e-12

ArrayLike = Union[np.ndarray, float, int, Sequence[float], Sequence[Sequence[float]]]


def as_tensor(value: ArrayLike) -> np.ndarray:
    """Coerce a value to a 2-D float64 array (scalars become 1x1, vectors rows)"""
    arr = np.array(value, dtype=np.float64)
    if arr.ndim == 0:
        return arr.reshape(1, 1)
    if arr.ndim == 1:
        return arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ContractViolation(f"tensors are 2-D, got shape {arr.shape}")
    return arr


def stable_softmax(x: ArrayLike) -> np.ndarray:
    """Softmax along the last axis with max subtraction"""
    arr = np.asarray(x, dtype=np.float64)
    if arr.size == 0 or arr.shape[-1] == 0:
        raise ContractViolation("softmax of an empty row")
    shifted = arr - arr.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    for axis in range(2):
        if shape[axis] == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(op: str, a: np.ndarray, b: np.ndarray) -> None:
    for axis in range(2):
        if a.shape[axis] != b.shape[axis] and 1 not in (a.shape[axis], b.shape[axis]):
            raise ContractViolation(f"{op}: shapes {a.shape} and {b.shape} do not broadcast")


@dataclass
class TapeNode:
    """One recorded primitive application"""
    op: str
    inputs: Tuple[int, ...]
    value: np.ndarray
    saved: Dict[str, Any] = field(default_factory=dict)
    requires_grad: bool = False
    name: Optional[str] = None


class Variable:
    """Handle to a value recorded on a tape"""

    __slots__ = ("tape", "index")

    def __init__(self, tape: "Tape", index: int):
        self.tape = tape
        self.index = index

    @property
    def value(self) -> np.ndarray:
        return self.tape.nodes[self.index].value

    @property
    def shape(self) -> Tuple[int, int]:
        return self.value.shape

    @property
    def rows(self) -> int:
        return self.value.shape[0]

    @property
    def cols(self) -> int:
        return self.value.shape[1]

    def _lift(self, other: Union["Variable", ArrayLike]) -> "Variable":
        if isinstance(other, Variable):
            return other
        return self.tape.constant(other)

    def __add__(self, other):
        return self.tape.add(self, self._lift(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.tape.add(self, self.tape.scale(self._lift(other), -1.0))

    def __neg__(self):
        return self.tape.scale(self, -1.0)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return self.tape.scale(self, float(other))
        return self.tape.mul(self, self._lift(other))

    __rmul__ = __mul__

    def __matmul__(self, other):
        return self.tape.matmul(self, self._lift(other))

    def __repr__(self) -> str:
        node = self.tape.nodes[self.index]
        return f"Variable(#{self.index} {node.op} shape={node.value.shape})"


class Tape:
    """Ordered record of primitive applications"""

    def __init__(self):
        self.nodes: List[TapeNode] = []
        self.parameters: Dict[str, int] = {}
        self.visit_counts: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.nodes)

    def _record(self, op: str, inputs: Sequence[Variable], value: np.ndarray, **saved: Any) -> Variable:
        for var in inputs:
            if var.tape is not self:
                raise ContractViolation(f"{op}: input recorded on a different tape")
        if not np.all(np.isfinite(value)):
            raise ContractViolation(f"{op}: produced non-finite values")
        requires_grad = any(self.nodes[v.index].requires_grad for v in inputs)
        self.nodes.append(
            TapeNode(op=op, inputs=tuple(v.index for v in inputs), value=value, saved=saved, requires_grad=requires_grad)
        )
        return Variable(self, len(self.nodes) - 1)

    # Leaves

    def parameter(self, value: ArrayLike, name: Optional[str] = None) -> Variable:
        """Record a differentiable leaf"""
        arr = as_tensor(value).copy()
        if not np.all(np.isfinite(arr)):
            raise ContractViolation(f"parameter {name!r} has non-finite entries")
        self.nodes.append(TapeNode(op="param", inputs=(), value=arr, requires_grad=True, name=name))
        index = len(self.nodes) - 1
        if name is not None:
            if name in self.parameters:
                raise ContractViolation(f"parameter {name!r} recorded twice")
            self.parameters[name] = index
        return Variable(self, index)

    def constant(self, value: ArrayLike) -> Variable:
        """Record a leaf that receives no gradient"""
        arr = as_tensor(value)
        if not np.all(np.isfinite(arr)):
            raise ContractViolation("constant has non-finite entries")
        self.nodes.append(TapeNode(op="const", inputs=(), value=arr))
        return Variable(self, len(self.nodes) - 1)

    def zeros(self, rows: int, cols: int) -> Variable:
        return self.constant(np.zeros((rows, cols)))

    # Primitives

    def matmul(self, a: Variable, b: Variable) -> Variable:
        if a.cols != b.rows:
            raise ContractViolation(f"matmul: shapes {a.shape} and {b.shape} do not align")
        return self._record("matmul", (a, b), a.value @ b.value)

    def add(self, a: Variable, b: Variable) -> Variable:
        _check_broadcast("add", a.value, b.value)
        return self._record("add", (a, b), a.value + b.value)

    def mul(self, a: Variable, b: Variable) -> Variable:
        """Elementwise product; a column or row of ones broadcasts"""
        _check_broadcast("mul", a.value, b.value)
        return self._record("mul", (a, b), a.value * b.value)

    def scale(self, a: Variable, c: float) -> Variable:
        return self._record("scale", (a,), a.value * float(c), c=float(c))

    def concat_cols(self, parts: Sequence[Variable]) -> Variable:
        if not parts:
            raise ContractViolation("concat_cols: nothing to concatenate")
        rows = {p.rows for p in parts}
        if len(rows) != 1:
            raise ContractViolation(f"concat_cols: row counts differ {sorted(rows)}")
        widths = [p.cols for p in parts]
        return self._record("concat_cols", tuple(parts), np.concatenate([p.value for p in parts], axis=1), widths=widths)

    def gather_rows(self, a: Variable, index: ArrayLike) -> Variable:
        idx = np.asarray(index, dtype=np.int64).ravel()
        if idx.size and (idx.min() < 0 or idx.max() >= a.rows):
            raise ContractViolation(f"gather_rows: index out of range for {a.rows} rows")
        return self._record("gather_rows", (a,), a.value[idx], index=idx)

    def scatter_add_rows(self, a: Variable, index: ArrayLike, num_rows: int) -> Variable:
        idx = np.asarray(index, dtype=np.int64).ravel()
        if idx.size != a.rows:
            raise ContractViolation(f"scatter_add_rows: {idx.size} targets for {a.rows} rows")
        if idx.size and (idx.min() < 0 or idx.max() >= num_rows):
            raise ContractViolation(f"scatter_add_rows: target out of range for {num_rows} rows")
        out = np.zeros((num_rows, a.cols))
        np.add.at(out, idx, a.value)
        return self._record("scatter_add_rows", (a,), out, index=idx)

    def relu(self, a: Variable) -> Variable:
        return self._record("relu", (a,), np.maximum(a.value, 0.0))

    def leaky_relu(self, a: Variable, slope: float = LEAKY_RELU_SLOPE) -> Variable:
        return self._record("leaky_relu", (a,), np.where(a.value > 0, a.value, slope * a.value), slope=slope)

    def exp(self, a: Variable) -> Variable:
        return self._record("exp", (a,), np.exp(a.value))

    def log(self, a: Variable, floor: float = LOG_FLOOR) -> Variable:
        """Natural log of max(a, floor); no gradient below the floor"""
        return self._record("log", (a,), np.log(np.maximum(a.value, floor)), floor=floor)

    def row_softmax(self, a: Variable) -> Variable:
        return self._record("row_softmax", (a,), stable_softmax(a.value))

    def sum(self, a: Variable) -> Variable:
        return self._record("sum", (a,), np.array([[a.value.sum()]]))

    def mean(self, a: Variable) -> Variable:
        if a.value.size == 0:
            raise ContractViolation("mean of an empty tensor")
        return self._record("mean", (a,), np.array([[a.value.mean()]]))

    def dropout(self, a: Variable, mask: np.ndarray) -> Variable:
        """Multiply by a pre-sampled, pre-scaled mask"""
        mask = np.asarray(mask, dtype=np.float64)
        if mask.shape != a.shape:
            raise ContractViolation(f"dropout: mask {mask.shape} does not match {a.shape}")
        return self._record("dropout", (a,), a.value * mask, mask=mask)

    def cross_entropy(self, logits: Variable, labels: ArrayLike) -> Variable:
        """Mean cross-entropy of integer labels against row logits"""
        y = np.asarray(labels, dtype=np.int64).ravel()
        if y.size != logits.rows:
            raise ContractViolation(f"cross_entropy: {y.size} labels for {logits.rows} rows")
        if y.size == 0:
            raise ContractViolation("cross_entropy: empty batch")
        if y.min() < 0 or y.max() >= logits.cols:
            raise ContractViolation(f"cross_entropy: label out of range [0, {logits.cols})")
        z = logits.value
        shifted = z - z.max(axis=1, keepdims=True)
        log_norm = np.log(np.exp(shifted).sum(axis=1))
        losses = log_norm - shifted[np.arange(y.size), y]
        return self._record("cross_entropy", (logits,), np.array([[losses.mean()]]), labels=y)

    def backward(self, loss: Variable) -> Dict[int, np.ndarray]:
        return evaluate_and_backprop(self, loss)

    def gradients_by_name(self, grads: Dict[int, np.ndarray]) -> Dict[str, np.ndarray]:
        return {name: grads[index] for name, index in self.parameters.items()}


# Backward rules: (node, upstream gradient, input values) -> gradient per input

def _grad_matmul(node, g, a, b):
    return g @ b.T, a.T @ g


def _grad_add(node, g, a, b):
    return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)


def _grad_mul(node, g, a, b):
    return _unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)


def _grad_scale(node, g, a):
    return (g * node.saved["c"],)


def _grad_concat_cols(node, g, *parts):
    bounds = np.cumsum(node.saved["widths"])[:-1]
    return tuple(np.split(g, bounds, axis=1))


def _grad_gather_rows(node, g, a):
    out = np.zeros_like(a)
    np.add.at(out, node.saved["index"], g)
    return (out,)


def _grad_scatter_add_rows(node, g, a):
    return (g[node.saved["index"]],)


def _grad_relu(node, g, a):
    return (g * (a > 0),)


def _grad_leaky_relu(node, g, a):
    return (g * np.where(a > 0, 1.0, node.saved["slope"]),)


def _grad_exp(node, g, a):
    return (g * node.value,)


def _grad_log(node, g, a):
    floor = node.saved["floor"]
    safe = np.where(a > floor, a, 1.0)
    return (np.where(a > floor, g / safe, 0.0),)


def _grad_row_softmax(node, g, a):
    s = node.value
    return (s * (g - (g * s).sum(axis=1, keepdims=True)),)


def _grad_sum(node, g, a):
    return (np.full_like(a, g[0, 0]),)


def _grad_mean(node, g, a):
    return (np.full_like(a, g[0, 0] / a.size),)


def _grad_dropout(node, g, a):
    return (g * node.saved["mask"],)


def _grad_cross_entropy(node, g, logits):
    y = node.saved["labels"]
    probs = stable_softmax(logits)
    probs[np.arange(y.size), y] -= 1.0
    return (probs * (g[0, 0] / y.size),)


BACKWARD_RULES: Dict[str, Callable[..., Tuple[np.ndarray, ...]]] = {
    "matmul": _grad_matmul,
    "add": _grad_add,
    "mul": _grad_mul,
    "scale": _grad_scale,
    "concat_cols": _grad_concat_cols,
    "gather_rows": _grad_gather_rows,
    "scatter_add_rows": _grad_scatter_add_rows,
    "relu": _grad_relu,
    "leaky_relu": _grad_leaky_relu,
    "exp": _grad_exp,
    "log": _grad_log,
    "row_softmax": _grad_row_softmax,
    "sum": _grad_sum,
    "mean": _grad_mean,
    "dropout": _grad_dropout,
    "cross_entropy": _grad_cross_entropy,
}

LEAF_OPS = ("param", "const")


def evaluate_and_backprop(tape: Tape, loss: Variable) -> Dict[int, np.ndarray]:
    """Gradient of a scalar loss with respect to every parameter node

    Nodes are visited exactly once, from the loss back to the first record.
    Parameters off the loss path receive zero tensors.
    """
    if loss.tape is not tape:
        raise ContractViolation("loss was recorded on a different tape")
    if loss.shape != (1, 1):
        raise ContractViolation(f"loss must be 1x1, got {loss.shape}")
    for node in tape.nodes[: loss.index + 1]:
        if node.op not in BACKWARD_RULES and node.op not in LEAF_OPS:
            raise ContractViolation(f"unsupported primitive on tape: {node.op}")

    grads: List[Optional[np.ndarray]] = [None] * len(tape.nodes)
    grads[loss.index] = np.ones((1, 1))
    visits = np.zeros(len(tape.nodes), dtype=np.int64)

    for index in range(loss.index, -1, -1):
        visits[index] += 1
        node = tape.nodes[index]
        g = grads[index]
        if g is None or node.op in LEAF_OPS or not node.requires_grad:
            continue
        inputs = [tape.nodes[i].value for i in node.inputs]
        input_grads = BACKWARD_RULES[node.op](node, g, *inputs)
        for i, ig in zip(node.inputs, input_grads):
            if not tape.nodes[i].requires_grad:
                continue
            grads[i] = ig if grads[i] is None else grads[i] + ig

    tape.visit_counts = visits
    result: Dict[int, np.ndarray] = {}
    for index, node in enumerate(tape.nodes):
        if node.op == "param":
            g = grads[index]
            result[index] = np.zeros_like(node.value) if g is None else g
    return result


def check_gradients(
    build_loss: Callable[[Tape, Dict[str, Variable]], Variable],
    params: Dict[str, ArrayLike],
    eps: float = 1e-5,
    floor: float = 1e-8,
) -> float:
    """Max relative error between analytic and central-difference gradients

    Relative error per entry is |analytic - numeric| / max(|analytic|, |numeric|, floor).
    The loss builder must be deterministic: noise and dropout masks held fixed.
    """
    if eps <= 0:
        raise ContractViolation(f"eps must be > 0, got {eps}")
    base = {name: as_tensor(value) for name, value in params.items()}

    def evaluate(values: Dict[str, np.ndarray]) -> float:
        tape = Tape()
        bound = {name: tape.parameter(v, name=name) for name, v in values.items()}
        return float(build_loss(tape, bound).value[0, 0])

    tape = Tape()
    bound = {name: tape.parameter(v, name=name) for name, v in base.items()}
    loss = build_loss(tape, bound)
    analytic = tape.gradients_by_name(evaluate_and_backprop(tape, loss))

    worst = 0.0
    for name, value in base.items():
        for flat in range(value.size):
            pos = {k: v.copy() for k, v in base.items()}
            neg = {k: v.copy() for k, v in base.items()}
            pos[name].flat[flat] += eps
            neg[name].flat[flat] -= eps
            numeric = (evaluate(pos) - evaluate(neg)) / (2.0 * eps)
            exact = analytic[name].flat[flat]
            denom = max(abs(exact), abs(numeric), floor)
            worst = max(worst, abs(exact - numeric) / denom)
    return worst


def check_gradient(
    f: Callable[[Tape, Variable], Variable],
    x: ArrayLike,
    eps: float = 1e-5,
    floor: float = 1e-8,
) -> float:
    """Gradient check of a single-input scalar program"""
    return check_gradients(lambda tape, bound: f(tape, bound["x"]), {"x": x}, eps=eps, floor=floor)
