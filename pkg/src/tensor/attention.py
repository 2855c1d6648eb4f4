"""Multi-head scaled dot-product self-attention."""

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from src.errors import DimensionMismatch
from src.tensor.backend import EAGER, Ops
from src.tensor.tensor import DType, Tensor, randn, zeros


@dataclass(frozen=True)
class AttentionParams:
    """Row-convention projections: q = x·Wq + bq, output = concat(heads)·Wo + bo.

    Fields hold tensors for eager evaluation or graph nodes for training.
    """

    wq: Any
    wk: Any
    wv: Any
    wo: Any
    bq: Any = None
    bk: Any = None
    bv: Any = None
    bo: Any = None

    @property
    def width(self) -> int:
        return self.wq.shape[0]

    @classmethod
    def from_state(cls, state, prefix: str) -> "AttentionParams":
        return cls(*(state[f"{prefix}.{name}"] for name in ("wq", "wk", "wv", "wo", "bq", "bk", "bv", "bo")))


def init_attention(rng: np.random.Generator, prefix: str, d: int, dtype: DType) -> dict[str, Tensor]:
    state = {}
    for name in ("wq", "wk", "wv", "wo"):
        state[f"{prefix}.{name}"] = randn(rng, (d, d), 1.0 / math.sqrt(d), dtype)
    for name in ("bq", "bk", "bv", "bo"):
        state[f"{prefix}.{name}"] = zeros((d,), dtype)
    return state


def _project(ops: Ops, x, weight, bias):
    out = ops.matmul(x, weight)
    return out if bias is None else ops.add_bias(out, bias)


def multi_head_attention(tokens, params: AttentionParams, heads: int, ops: Ops = EAGER):
    """Self-attention over the rows of an n×d token matrix.

    Returns the n×d output and a heads×n×n stack of attention weights.
    """
    n, d = tokens.shape
    if d % heads != 0:
        raise DimensionMismatch(f"width {d} is not divisible by {heads} heads")
    if params.width != d:
        raise DimensionMismatch(f"attention projections expect width {params.width}, tokens have {d}")
    head_dim = d // heads
    q = _project(ops, tokens, params.wq, params.bq)
    k = _project(ops, tokens, params.wk, params.bk)
    v = _project(ops, tokens, params.wv, params.bv)

    outputs = []
    weights = []
    for h in range(heads):
        lo, hi = h * head_dim, (h + 1) * head_dim
        qh = ops.slice_axis(q, 1, lo, hi)
        kh = ops.slice_axis(k, 1, lo, hi)
        vh = ops.slice_axis(v, 1, lo, hi)
        scores = ops.scale(ops.matmul(qh, ops.permute(kh, (1, 0))), 1.0 / math.sqrt(head_dim))
        attn = ops.softmax(scores)
        weights.append(attn)
        outputs.append(ops.matmul(attn, vh))
    merged = outputs[0] if heads == 1 else ops.concat(outputs, axis=1)
    return _project(ops, merged, params.wo, params.bo), ops.stack(weights)


def zero_attention(d: int, dtype: DType = DType.F32) -> AttentionParams:
    z = zeros((d, d), dtype)
    b = zeros((d,), dtype)
    return AttentionParams(z, z, z, z, b, b, b, b)
