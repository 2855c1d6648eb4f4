"""Reverse-mode differentiation over tensor operations.

A ``Graph`` is a tape: every operation appends a node, so creation order is
a topological order. The forward value of each node is computed with the
same array helpers the eager backend uses.
"""

from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import special

from src.errors import DimensionMismatch, NotScalarLoss
from src.tensor import ops
from src.tensor.tensor import BatchNormParams, LayerNormParams, Tensor

BackwardFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]


class Node:
    """One recorded value."""

    __slots__ = ("graph", "index", "value", "parents", "backward_fn", "requires_grad", "name")

    def __init__(self, graph: "Graph", index: int, value: Tensor, parents: tuple["Node", ...],
                 backward_fn: BackwardFn | None, requires_grad: bool, name: str | None = None):
        self.graph = graph
        self.index = index
        self.value = value
        self.parents = parents
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def array(self) -> np.ndarray:
        return self.value.array

    def __repr__(self) -> str:
        label = self.name or f"#{self.index}"
        return f"Node({label}, shape={self.shape})"


class Graph:
    """Define-by-run tape with named trainable leaves."""

    def __init__(self):
        self.nodes: list[Node] = []
        self.params: dict[str, Node] = {}

    # Leaves

    def _append(self, value: Tensor, parents: tuple[Node, ...], backward_fn: BackwardFn | None,
                requires_grad: bool, name: str | None = None) -> Node:
        node = Node(self, len(self.nodes), value, parents, backward_fn, requires_grad, name)
        self.nodes.append(node)
        return node

    def param(self, name: str, tensor: Tensor) -> Node:
        if name in self.params:
            raise DimensionMismatch(f"parameter {name!r} registered twice")
        node = self._append(tensor, (), None, True, name)
        self.params[name] = node
        return node

    def constant(self, tensor: Tensor) -> Node:
        return self._append(tensor, (), None, False)

    def parameters(self, state: Mapping[str, Tensor], trainable: frozenset[str] | None = None) -> dict:
        """Register every trainable entry of state; the rest become constants."""
        return {name: (self.param(name, tensor) if trainable is None or name in trainable
                       else self.constant(tensor))
                for name, tensor in state.items()}

    def value(self, x) -> Tensor:
        return x.value if isinstance(x, Node) else x

    def _node(self, x) -> Node:
        if isinstance(x, Node):
            if x.graph is not self:
                raise DimensionMismatch("node belongs to another graph")
            return x
        if isinstance(x, Tensor):
            return self.constant(x)
        raise TypeError(f"expected Node or Tensor, got {type(x).__name__}")

    def _record(self, value: Tensor, parents: Sequence[Node], backward_fn: BackwardFn) -> Node:
        parents = tuple(parents)
        requires = any(p.requires_grad for p in parents)
        return self._append(value, parents if requires else (), backward_fn if requires else None, requires)

    # Linear algebra and elementwise

    def matmul(self, a, b) -> Node:
        a, b = self._node(a), self._node(b)
        out = ops.matmul(a.value, b.value)
        a_arr, b_arr = a.array, b.array

        def backward(g):
            return ops.matmul_arrays(g, b_arr.T.copy()), ops.matmul_arrays(a_arr.T.copy(), g)

        return self._record(out, (a, b), backward)

    def add(self, a, b) -> Node:
        a, b = self._node(a), self._node(b)
        return self._record(ops.add(a.value, b.value), (a, b), lambda g: (g, g))

    def mul(self, a, b) -> Node:
        a, b = self._node(a), self._node(b)
        a_arr, b_arr = a.array, b.array
        return self._record(ops.mul(a.value, b.value), (a, b), lambda g: (g * b_arr, g * a_arr))

    def scale(self, a, factor: float) -> Node:
        a = self._node(a)
        typed = a.value.dtype.numpy_dtype.type(factor)
        return self._record(ops.scale(a.value, factor), (a,), lambda g: (g * typed,))

    def add_bias(self, a, bias) -> Node:
        a, bias = self._node(a), self._node(bias)
        leading = tuple(range(a.value.ndim - 1))
        return self._record(ops.add_bias(a.value, bias.value), (a, bias), lambda g: (g, g.sum(axis=leading)))

    def mul_scalar(self, a, s) -> Node:
        a, s = self._node(a), self._node(s)
        a_arr = a.array
        s_val = s.array.reshape(())
        s_shape = s.shape

        def backward(g):
            return g * s_val, np.asarray((g * a_arr).sum()).reshape(s_shape)

        return self._record(ops.mul_scalar(a.value, s.value), (a, s), backward)

    def relu(self, x) -> Node:
        x = self._node(x)
        mask = x.array > 0
        return self._record(ops.relu(x.value), (x,), lambda g: (g * mask,))

    def gelu(self, x) -> Node:
        x = self._node(x)
        arr = x.array

        def backward(g):
            cdf = 0.5 * (1.0 + special.erf(arr / np.sqrt(2.0)))
            pdf = np.exp(-0.5 * arr * arr) / np.sqrt(2.0 * np.pi)
            return (g * (cdf + arr * pdf)).astype(arr.dtype),

        return self._record(ops.gelu(x.value), (x,), backward)

    def sigmoid(self, x) -> Node:
        x = self._node(x)
        out = ops.sigmoid(x.value)
        y = out.array
        return self._record(out, (x,), lambda g: (g * y * (1 - y),))

    def softmax(self, x) -> Node:
        x = self._node(x)
        out = ops.softmax(x.value)
        y = out.array
        return self._record(out, (x,), lambda g: (y * (g - (g * y).sum(axis=-1, keepdims=True)),))

    # Convolution and pooling

    def conv2d(self, x, kernel, bias=None, stride: int = 1, pad: int = 0) -> Node:
        x, kernel = self._node(x), self._node(kernel)
        bias = self._node(bias) if bias is not None else None
        out = ops.conv2d(x.value, kernel.value, bias.value if bias is not None else None, stride, pad)
        padded = ops.pad_spatial(x.array, pad, 0.0)
        k_arr = kernel.array
        c_out, c_in, k, _ = k_arr.shape
        out_h, out_w = out.shape[1:]
        in_h, in_w = x.shape[1:]

        def backward(g):
            g_kernel = np.zeros_like(k_arr)
            g_padded = np.zeros_like(padded)
            for c in range(c_in):
                for i in range(k):
                    for j in range(k):
                        view = ops.window(padded, c, i, j, stride, out_h, out_w)
                        g_kernel[:, c, i, j] = (g * view[None]).sum(axis=(1, 2))
                        g_view = ops.window(g_padded, c, i, j, stride, out_h, out_w)
                        g_view += np.tensordot(k_arr[:, c, i, j], g, axes=(0, 0))
            g_x = g_padded[:, pad:pad + in_h, pad:pad + in_w]
            grads = [g_x, g_kernel]
            if bias is not None:
                grads.append(g.sum(axis=(1, 2)))
            return grads

        parents = (x, kernel) if bias is None else (x, kernel, bias)
        return self._record(out, parents, backward)

    def maxpool2d(self, x, k: int, stride: int, pad: int = 0) -> Node:
        x = self._node(x)
        out_h, out_w = ops.check_pool(x.value, k, stride, pad)
        padded = ops.pad_spatial(x.array, pad, -np.inf)
        pooled, winner = ops.maxpool_arrays(padded, k, stride, out_h, out_w)
        in_h, in_w = x.shape[1:]

        def backward(g):
            g_padded = np.zeros(padded.shape, dtype=g.dtype)
            for i in range(k):
                for j in range(k):
                    g_view = ops.window(g_padded, slice(None), i, j, stride, out_h, out_w)
                    g_view += np.where(winner == i * k + j, g, 0)
            return g_padded[:, pad:pad + in_h, pad:pad + in_w],

        return self._record(Tensor.wrap(pooled, x.value.dtype), (x,), backward)

    # Normalization

    def batch_norm(self, x, p: BatchNormParams) -> Node:
        x, gamma, beta = self._node(x), self._node(p.gamma), self._node(p.beta)
        mean, var = self.value(p.running_mean), self.value(p.running_var)
        plain = BatchNormParams(gamma.value, beta.value, mean, var, p.eps)
        out = ops.batch_norm_eval(x.value, plain)
        _, x_hat, std = ops.batch_norm_arrays(x.array, gamma.array, beta.array, mean.array, var.array, p.eps)
        gamma_arr = gamma.array

        def backward(g):
            return (g * (gamma_arr / std)[:, None, None],
                    (g * x_hat).sum(axis=(1, 2)),
                    g.sum(axis=(1, 2)))

        return self._record(out, (x, gamma, beta), backward)

    def layer_norm(self, x, p: LayerNormParams) -> Node:
        x, gamma, beta = self._node(x), self._node(p.gamma), self._node(p.beta)
        out = ops.layer_norm(x.value, LayerNormParams(gamma.value, beta.value, p.eps))
        _, x_hat, std = ops.layer_norm_arrays(x.array, gamma.array, beta.array, p.eps)
        gamma_arr = gamma.array
        d = x.shape[-1]
        leading = tuple(range(x.value.ndim - 1))

        def backward(g):
            g_hat = g * gamma_arr
            g_x = (d * g_hat - g_hat.sum(axis=-1, keepdims=True)
                   - x_hat * (g_hat * x_hat).sum(axis=-1, keepdims=True)) / (d * std)
            return g_x, (g * x_hat).sum(axis=leading), g.sum(axis=leading)

        return self._record(out, (x, gamma, beta), backward)

    # Reductions and layout

    def mean(self, x, axis=None) -> Node:
        x = self._node(x)
        out = ops.mean(x.value, axis)
        axes = ops._axes(x.value.ndim, axis)
        count = int(np.prod([x.shape[a] for a in axes]))
        in_shape = x.shape
        kept = tuple(1 if a in axes else n for a, n in enumerate(in_shape))

        def backward(g):
            return np.broadcast_to(g.reshape(kept) / count, in_shape).astype(g.dtype),

        return self._record(out, (x,), backward)

    def reshape(self, x, shape: Sequence[int]) -> Node:
        x = self._node(x)
        in_shape = x.shape
        return self._record(ops.reshape(x.value, shape), (x,), lambda g: (g.reshape(in_shape),))

    def permute(self, x, axes: Sequence[int]) -> Node:
        x = self._node(x)
        inverse = tuple(np.argsort(axes))
        return self._record(ops.permute(x.value, axes), (x,), lambda g: (np.transpose(g, inverse),))

    def concat(self, xs, axis: int = 0) -> Node:
        nodes = [self._node(x) for x in xs]
        out = ops.concat([n.value for n in nodes], axis)
        bounds = np.cumsum([n.shape[axis] for n in nodes])[:-1]

        def backward(g):
            return np.split(g, bounds, axis=axis)

        return self._record(out, nodes, backward)

    def stack(self, xs) -> Node:
        nodes = [self._node(x) for x in xs]
        out = ops.stack([n.value for n in nodes])
        return self._record(out, nodes, lambda g: [g[i] for i in range(len(nodes))])

    def slice_axis(self, x, axis: int, start: int, stop: int) -> Node:
        x = self._node(x)
        out = ops.slice_axis(x.value, axis, start, stop)
        axis %= x.value.ndim
        in_shape = x.shape

        def backward(g):
            full = np.zeros(in_shape, dtype=g.dtype)
            index = [slice(None)] * len(in_shape)
            index[axis] = slice(start, stop)
            full[tuple(index)] = g
            return full,

        return self._record(out, (x,), backward)

    def gather_rows(self, table, ids: Sequence[int]) -> Node:
        table = self._node(table)
        out = ops.gather_rows(table.value, ids)
        index = np.asarray(ids, dtype=np.int64)
        in_shape = table.shape

        def backward(g):
            full = np.zeros(in_shape, dtype=g.dtype)
            np.add.at(full, index, g)
            return full,

        return self._record(out, (table,), backward)

    def select(self, x, index: int) -> Node:
        x = self._node(x)
        in_shape = x.shape

        def backward(g):
            full = np.zeros(in_shape, dtype=g.dtype)
            full[index] = g
            return full,

        return self._record(ops.select(x.value, index), (x,), backward)

    # Loss

    def bce_loss(self, probs, labels: Tensor) -> Node:
        probs = self._node(probs)
        labels = self._node(labels)
        out = ops.bce_loss(probs.value, labels.value)
        p = probs.array.astype(np.float64)
        y = labels.array.astype(np.float64)
        inside = (p >= ops.BCE_CLAMP) & (p <= 1.0 - ops.BCE_CLAMP)
        clamped = np.clip(p, ops.BCE_CLAMP, 1.0 - ops.BCE_CLAMP)
        dtype = probs.array.dtype

        def backward(g):
            local = (-(y / clamped) + (1.0 - y) / (1.0 - clamped)) / p.size
            return (float(g) * local * inside).astype(dtype), None

        return self._record(out, (probs, labels), backward)

    # Differentiation

    def backward(self, loss: Node) -> dict[str, Tensor]:
        """Populate gradients of every registered parameter with respect to a scalar loss.

        Parameters the loss does not reach receive zero gradients.
        """
        loss = self._node(loss)
        if loss.value.size != 1:
            raise NotScalarLoss(f"loss has shape {loss.shape}")
        dtype = loss.value.dtype
        grads: dict[int, np.ndarray] = {loss.index: np.ones(loss.shape, dtype=dtype.numpy_dtype)}
        param_grads: dict[str, np.ndarray] = {}
        for node in reversed(self.nodes[:loss.index + 1]):
            g = grads.pop(node.index, None)
            if g is None:
                continue
            if node.name is not None and node.name in self.params:
                param_grads[node.name] = g
            if node.backward_fn is None:
                continue
            for parent, parent_grad in zip(node.parents, node.backward_fn(g)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                parent_grad = np.asarray(parent_grad, dtype=parent.array.dtype)
                existing = grads.get(parent.index)
                grads[parent.index] = parent_grad if existing is None else existing + parent_grad
        return {name: Tensor.wrap(param_grads[name], node.value.dtype) if name in param_grads
                else Tensor.wrap(np.zeros(node.shape), node.value.dtype)
                for name, node in self.params.items()}
