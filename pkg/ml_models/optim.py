"""
Adam optimizer over named numpy parameters
"""
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, Optional, Tuple
import logging

import numpy as np

from core.errors import ContractViolation

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdamState:
    """Moment estimates and step counter for a set of named parameters"""
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
    state: AdamState,
) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update; inputs are left untouched"""
    if state.lr < 0:
        raise ContractViolation(f"learning rate must be >= 0, got {state.lr}")
    step = state.step + 1
    bc1 = 1.0 - state.beta1 ** step
    bc2 = 1.0 - state.beta2 ** step

    new_params: Dict[str, np.ndarray] = {}
    new_m: Dict[str, np.ndarray] = dict(state.m)
    new_v: Dict[str, np.ndarray] = dict(state.v)
    for name, value in params.items():
        if name not in grads:
            raise ContractViolation(f"no gradient for parameter {name!r}")
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != value.shape:
            raise ContractViolation(f"gradient shape {g.shape} does not match parameter {name!r} {value.shape}")
        m_prev = state.m.get(name, np.zeros_like(value))
        v_prev = state.v.get(name, np.zeros_like(value))
        if m_prev.shape != value.shape or v_prev.shape != value.shape:
            raise ContractViolation(f"moment shapes do not match parameter {name!r}")

        m = state.beta1 * m_prev + (1.0 - state.beta1) * g
        v = state.beta2 * v_prev + (1.0 - state.beta2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        new_params[name] = value - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        new_m[name] = m
        new_v[name] = v

    return new_params, replace(state, step=step, m=new_m, v=new_v)


class AdamOptimizer:
    """Stateful wrapper used by the training loop"""

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)

    def step(
        self,
        params: Dict[str, np.ndarray],
        grads: Dict[str, np.ndarray],
        names: Optional[Iterable[str]] = None,
    ) -> Dict[str, np.ndarray]:
        """Update the named subset of params (all by default); returns a new dict"""
        names = list(params) if names is None else list(names)
        subset = {name: params[name] for name in names}
        updated, self.state = adam_step(subset, grads, self.state)
        merged = dict(params)
        merged.update(updated)
        return merged
