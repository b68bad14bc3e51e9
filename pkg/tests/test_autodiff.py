"""
Tests for the tape-based differentiation engine
"""
import numpy as np
import pytest

from core.errors import ContractViolation
from core.schemas import GraphMode, HyperParams
from ml_models.autodiff import Tape, check_gradient, check_gradients, evaluate_and_backprop
from ml_models.sparse_structure import forward_document
from services.graph_service import batch_graphs
from tests.conftest import random_graph, small_params

SEEDS = range(20)
TOLERANCE = 1e-4
FLOOR = 1e-6


def _away_from_zero(rng, shape, low=0.1):
    return rng.choice([-1.0, 1.0], size=shape) * rng.uniform(low, 1.0, size=shape)


def _weighted_sum(tape, out, rng):
    """Scalar sum(out * W) with a fixed random W so every output entry matters"""
    w = tape.constant(rng.uniform(0.5, 1.5, size=out.shape) * rng.choice([-1.0, 1.0], size=out.shape))
    return tape.sum(tape.mul(out, w))


@pytest.mark.parametrize("seed", SEEDS)
def test_matmul_add_mul_gradients(seed):
    rng = np.random.default_rng(seed)
    values = {"a": rng.standard_normal((4, 3)), "b": rng.standard_normal((3, 2)), "c": rng.standard_normal((1, 2))}
    w = rng.standard_normal((4, 2))

    def loss(tape, bound):
        out = tape.add(tape.matmul(bound["a"], bound["b"]), bound["c"])
        out = tape.mul(out, tape.constant(w))
        return tape.sum(out)

    assert check_gradients(loss, values, floor=FLOOR) < TOLERANCE


@pytest.mark.parametrize("seed", SEEDS)
def test_broadcast_mul_and_scale_gradients(seed):
    rng = np.random.default_rng(seed)
    values = {"x": rng.standard_normal((5, 3)), "col": rng.standard_normal((5, 1))}

    def loss(tape, bound):
        out = tape.scale(tape.mul(bound["x"], bound["col"]), -1.7)
        return _weighted_sum(tape, out, np.random.default_rng(seed))

    assert check_gradients(loss, values, floor=FLOOR) < TOLERANCE


@pytest.mark.parametrize("seed", SEEDS)
def test_gather_scatter_concat_gradients(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((4, 2))
    gather = rng.integers(0, 4, size=7)
    scatter = rng.integers(0, 3, size=7)

    def f(tape, v):
        rows = tape.gather_rows(v, gather)
        both = tape.concat_cols([rows, tape.scale(rows, 2.0)])
        out = tape.scatter_add_rows(both, scatter, 3)
        return _weighted_sum(tape, out, np.random.default_rng(seed))

    assert check_gradient(f, x, floor=FLOOR) < TOLERANCE


@pytest.mark.parametrize("seed", SEEDS)
def test_activation_gradients(seed):
    rng = np.random.default_rng(seed)
    x = _away_from_zero(rng, (4, 3))

    def f(tape, v):
        out = tape.add(tape.relu(v), tape.leaky_relu(v))
        out = tape.add(out, tape.exp(tape.scale(v, 0.5)))
        return _weighted_sum(tape, out, np.random.default_rng(seed))

    assert check_gradient(f, x, floor=FLOOR) < TOLERANCE


@pytest.mark.parametrize("seed", SEEDS)
def test_log_softmax_mean_gradients(seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.5, 2.0, size=(3, 4))

    def f(tape, v):
        out = tape.add(tape.log(v), tape.row_softmax(v))
        return tape.mean(tape.mul(out, tape.constant(np.random.default_rng(seed).standard_normal((3, 4)))))

    assert check_gradient(f, x, floor=FLOOR) < TOLERANCE


@pytest.mark.parametrize("seed", SEEDS)
def test_cross_entropy_and_dropout_gradients(seed):
    rng = np.random.default_rng(seed)
    logits = rng.standard_normal((6, 3))
    labels = rng.integers(0, 3, size=6)
    mask = (rng.random((6, 3)) >= 0.3) / 0.7

    def f(tape, v):
        return tape.cross_entropy(tape.dropout(v, mask), labels)

    assert check_gradient(f, logits, floor=FLOOR) < TOLERANCE


def test_gradient_of_square_sum():
    tape = Tape()
    x = tape.parameter([[1.0, -2.0, 3.0]], name="x")
    loss = tape.sum(tape.mul(x, x))
    grads = tape.gradients_by_name(evaluate_and_backprop(tape, loss))
    np.testing.assert_allclose(grads["x"], [[2.0, -4.0, 6.0]])


def test_fan_out_accumulates():
    tape = Tape()
    x = tape.parameter([[3.0]], name="x")
    loss = tape.add(tape.add(x, x), tape.mul(x, x))
    grads = tape.gradients_by_name(tape.backward(loss))
    assert grads["x"][0, 0] == pytest.approx(2.0 + 6.0)


def test_every_node_visited_once():
    tape = Tape()
    x = tape.parameter(np.ones((2, 2)), name="x")
    y = tape.relu(tape.matmul(x, x))
    loss = tape.sum(tape.add(y, x))
    tape.backward(loss)
    assert tape.visit_counts.tolist() == [1] * len(tape)


def test_unused_parameter_gets_zero_gradient():
    tape = Tape()
    x = tape.parameter([[1.0, 2.0]], name="x")
    tape.parameter([[5.0]], name="unused")
    grads = tape.gradients_by_name(tape.backward(tape.sum(x)))
    np.testing.assert_array_equal(grads["unused"], [[0.0]])


def test_constants_receive_no_gradient():
    tape = Tape()
    x = tape.parameter([[2.0]], name="x")
    c = tape.constant([[4.0]])
    grads = tape.backward(tape.mul(x, c))
    assert set(grads) == {x.index}
    assert grads[x.index][0, 0] == 4.0


def test_subtraction_operator():
    tape = Tape()
    s = tape.parameter([[0.25, 0.75]], name="s")
    out = tape.constant(1.0) - s
    np.testing.assert_allclose(out.value, [[0.75, 0.25]])
    grads = tape.gradients_by_name(tape.backward(tape.sum(out)))
    np.testing.assert_allclose(grads["s"], [[-1.0, -1.0]])


def test_log_floor_blocks_gradient():
    tape = Tape()
    x = tape.parameter([[0.0, 1.0]], name="x")
    out = tape.log(x)
    assert out.value[0, 0] == pytest.approx(np.log(1e-12))
    grads = tape.gradients_by_name(tape.backward(tape.sum(out)))
    np.testing.assert_allclose(grads["x"], [[0.0, 1.0]])


def test_non_scalar_loss_is_rejected():
    tape = Tape()
    x = tape.parameter(np.ones((2, 2)), name="x")
    with pytest.raises(ContractViolation):
        tape.backward(x)


def test_mismatched_shapes_are_rejected():
    tape = Tape()
    a = tape.parameter(np.ones((2, 3)))
    b = tape.parameter(np.ones((2, 3)))
    with pytest.raises(ContractViolation):
        tape.matmul(a, b)
    with pytest.raises(ContractViolation):
        tape.add(a, tape.constant(np.ones((3, 2))))


def test_cross_tape_inputs_are_rejected():
    a = Tape().parameter([[1.0]])
    tape = Tape()
    with pytest.raises(ContractViolation):
        tape.relu(a)


def test_duplicate_parameter_names_are_rejected():
    tape = Tape()
    tape.parameter([[1.0]], name="w")
    with pytest.raises(ContractViolation):
        tape.parameter([[2.0]], name="w")


def test_non_finite_values_are_rejected():
    tape = Tape()
    with pytest.raises(ContractViolation):
        tape.constant([[np.inf]])
    x = tape.parameter([[1000.0]])
    with pytest.raises(ContractViolation):
        tape.exp(x)


@pytest.mark.parametrize("seed", SEEDS)
@pytest.mark.parametrize("mode", [GraphMode.OURS, GraphMode.COMPLETE])
def test_full_model_gradients_in_relaxed_mode(seed, mode):
    rng = np.random.default_rng(seed)
    graphs = [random_graph(rng, f"g{i}", max_nodes=6, vocab=6) for i in range(2)]
    batch = batch_graphs(graphs)
    hyper = HyperParams(mode=mode, num_layers=2, hidden_dim=3, tau=0.5, threshold=0.5, lam=0.1, dropout=0.0)
    params = small_params(hyper, vocab=6, d0=3, seed=seed)

    def loss(tape, bound):
        result = forward_document(batch, params, hyper, training=True, seed=seed, relaxed=True, tape=tape, bound=bound)
        return result.loss

    assert check_gradients(loss, params.tensors, floor=1e-5) < TOLERANCE
