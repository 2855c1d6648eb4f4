"""Execution backends.

Model code is written once against the ``Ops`` protocol and runs either
eagerly on tensors (``EAGER``) or recorded on an autodiff ``Graph``.
"""

from typing import Any, Mapping, Protocol, Sequence

from src.tensor import ops
from src.tensor.tensor import BatchNormParams, LayerNormParams, Tensor


class Ops(Protocol):
    """Operations every backend provides; values are backend-specific."""

    def value(self, x: Any) -> Tensor: ...
    def constant(self, tensor: Tensor) -> Any: ...
    def parameters(self, state: Mapping[str, Tensor], trainable: frozenset[str] | None = None) -> dict: ...
    def matmul(self, a, b): ...
    def add(self, a, b): ...
    def mul(self, a, b): ...
    def scale(self, a, factor: float): ...
    def add_bias(self, a, bias): ...
    def mul_scalar(self, a, s): ...
    def conv2d(self, x, kernel, bias=None, stride: int = 1, pad: int = 0): ...
    def maxpool2d(self, x, k: int, stride: int, pad: int = 0): ...
    def batch_norm(self, x, p: BatchNormParams): ...
    def layer_norm(self, x, p: LayerNormParams): ...
    def gelu(self, x): ...
    def relu(self, x): ...
    def sigmoid(self, x): ...
    def softmax(self, x): ...
    def mean(self, x, axis=None): ...
    def reshape(self, x, shape: Sequence[int]): ...
    def permute(self, x, axes: Sequence[int]): ...
    def concat(self, xs, axis: int = 0): ...
    def stack(self, xs): ...
    def slice_axis(self, x, axis: int, start: int, stop: int): ...
    def gather_rows(self, table, ids: Sequence[int]): ...
    def select(self, x, index: int): ...
    def bce_loss(self, probs, labels: Tensor): ...


class EagerOps:
    """Immediate evaluation on immutable tensors; nothing is recorded."""

    def value(self, x: Tensor) -> Tensor:
        return x

    def constant(self, tensor: Tensor) -> Tensor:
        return tensor

    def parameters(self, state: Mapping[str, Tensor], trainable=None) -> dict:
        return dict(state)

    matmul = staticmethod(ops.matmul)
    add = staticmethod(ops.add)
    mul = staticmethod(ops.mul)
    scale = staticmethod(ops.scale)
    add_bias = staticmethod(ops.add_bias)
    mul_scalar = staticmethod(ops.mul_scalar)
    conv2d = staticmethod(ops.conv2d)
    maxpool2d = staticmethod(ops.maxpool2d)
    batch_norm = staticmethod(ops.batch_norm_eval)
    layer_norm = staticmethod(ops.layer_norm)
    gelu = staticmethod(ops.gelu)
    relu = staticmethod(ops.relu)
    sigmoid = staticmethod(ops.sigmoid)
    softmax = staticmethod(ops.softmax)
    mean = staticmethod(ops.mean)
    reshape = staticmethod(ops.reshape)
    permute = staticmethod(ops.permute)
    concat = staticmethod(ops.concat)
    stack = staticmethod(ops.stack)
    slice_axis = staticmethod(ops.slice_axis)
    gather_rows = staticmethod(ops.gather_rows)
    select = staticmethod(ops.select)
    bce_loss = staticmethod(ops.bce_loss)


EAGER = EagerOps()
