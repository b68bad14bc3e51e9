"""
Tests for the Adam optimizer
"""
import numpy as np
import pytest

from core.errors import ContractViolation
from ml_models.optim import AdamOptimizer, AdamState, adam_step


def test_first_step_moves_by_learning_rate():
    params = {"w": np.array([[1.0, -1.0]])}
    grads = {"w": np.array([[0.5, -2.0]])}
    new_params, state = adam_step(params, grads, AdamState(lr=0.1))
    # bias-corrected first step is lr * sign(g)
    np.testing.assert_allclose(new_params["w"], [[0.9, -0.9]], atol=1e-6)
    assert state.step == 1


def test_zero_learning_rate_keeps_parameters():
    params = {"w": np.array([[1.0, 2.0]])}
    grads = {"w": np.array([[3.0, -4.0]])}
    new_params, state = adam_step(params, grads, AdamState(lr=0.0))
    np.testing.assert_array_equal(new_params["w"], params["w"])
    assert state.step == 1


def test_inputs_are_not_mutated():
    params = {"w": np.array([[1.0]])}
    grads = {"w": np.array([[1.0]])}
    adam_step(params, grads, AdamState(lr=0.1))
    assert params["w"][0, 0] == 1.0


def test_missing_gradient_is_rejected():
    with pytest.raises(ContractViolation):
        adam_step({"w": np.ones((1, 1))}, {}, AdamState())


def test_shape_mismatch_is_rejected():
    with pytest.raises(ContractViolation):
        adam_step({"w": np.ones((1, 2))}, {"w": np.ones((2, 1))}, AdamState())


def test_minimizes_a_quadratic():
    target = np.array([[3.0, -2.0]])
    optimizer = AdamOptimizer(lr=0.1)
    params = {"w": np.zeros((1, 2))}
    for _ in range(1000):
        params = optimizer.step(params, {"w": 2.0 * (params["w"] - target)})
    np.testing.assert_allclose(params["w"], target, atol=0.05)


def test_step_updates_only_named_subset():
    optimizer = AdamOptimizer(lr=0.1)
    params = {"a": np.ones((1, 1)), "frozen": np.ones((1, 1))}
    updated = optimizer.step(params, {"a": np.ones((1, 1))}, names=["a"])
    assert updated["a"][0, 0] < 1.0
    assert updated["frozen"][0, 0] == 1.0
    assert "frozen" not in optimizer.state.m
