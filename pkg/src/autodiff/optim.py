"""Adam optimizer over named parameter tensors."""

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from src.errors import DimensionMismatch
from src.tensor.tensor import Tensor


@dataclass
class AdamState:
    """First and second moment estimates per parameter name."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: Mapping[str, Tensor], lr: float = 1e-3, **kwargs) -> "AdamState":
        state = cls(lr=lr, **kwargs)
        for name, tensor in params.items():
            state.m[name] = np.zeros(tensor.shape, dtype=tensor.array.dtype)
            state.v[name] = np.zeros(tensor.shape, dtype=tensor.array.dtype)
        return state


def adam_step(state: AdamState, params: Mapping[str, Tensor], grads: Mapping[str, Tensor]) -> dict[str, Tensor]:
    """Apply one bias-corrected Adam update and return the new parameters.

    Parameters without a gradient entry are returned unchanged; their moments
    are not advanced.
    """
    state.t += 1
    correction1 = 1.0 - state.beta1 ** state.t
    correction2 = 1.0 - state.beta2 ** state.t
    updated = dict(params)
    for name, grad in grads.items():
        if name not in params:
            raise DimensionMismatch(f"gradient for unknown parameter {name!r}")
        param = params[name]
        if grad.shape != param.shape:
            raise DimensionMismatch(f"{name}: gradient {grad.shape} does not match parameter {param.shape}")
        m = state.m.setdefault(name, np.zeros(param.shape, dtype=param.array.dtype))
        v = state.v.setdefault(name, np.zeros(param.shape, dtype=param.array.dtype))
        if m.shape != param.shape:
            raise DimensionMismatch(f"{name}: moment shape {m.shape} does not match parameter {param.shape}")
        g = grad.array
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        state.m[name] = m
        state.v[name] = v
        m_hat = m / correction1
        v_hat = v / correction2
        updated[name] = Tensor.wrap(param.array - state.lr * m_hat / (np.sqrt(v_hat) + state.eps), param.dtype)
    return updated
