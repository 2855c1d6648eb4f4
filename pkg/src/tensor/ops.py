"""Pure tensor operations.

Every reduction that feeds a comparison against a loop oracle runs in a fixed
order: matmul accumulates over the inner index left to right, conv2d over
(input channel, kernel row, kernel column) with the bias added last. The
array helpers ending in ``_arrays`` are shared with the autodiff graph so
forward values are identical in both backends.
"""

from typing import Sequence

import numpy as np
from scipy import special

from src.errors import DimensionMismatch
from src.tensor.tensor import BatchNormParams, DType, LayerNormParams, Tensor


def _common_dtype(*tensors: Tensor) -> DType:
    dtypes = {tensor.dtype for tensor in tensors}
    if len(dtypes) != 1:
        raise DimensionMismatch(f"mixed tensor dtypes: {sorted(d.name for d in dtypes)}")
    return dtypes.pop()


def _same_shape(a: Tensor, b: Tensor, op: str):
    if a.shape != b.shape:
        raise DimensionMismatch(f"{op}: shapes {a.shape} and {b.shape} differ")


def output_size(size: int, k: int, stride: int, pad: int) -> int:
    """Spatial output length of a k-window sliding with stride and zero padding."""
    return (size + 2 * pad - k) // stride + 1


# Linear algebra

def matmul_arrays(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    m, k = a.shape
    n = b.shape[1]
    out = np.zeros((m, n), dtype=a.dtype)
    for p in range(k):
        out += a[:, p, None] * b[None, p, :]
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    dtype = _common_dtype(a, b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionMismatch(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return Tensor.wrap(matmul_arrays(a.array, b.array), dtype)


# Elementwise

def add(a: Tensor, b: Tensor) -> Tensor:
    dtype = _common_dtype(a, b)
    _same_shape(a, b, "add")
    return Tensor.wrap(a.array + b.array, dtype)


def mul(a: Tensor, b: Tensor) -> Tensor:
    dtype = _common_dtype(a, b)
    _same_shape(a, b, "mul")
    return Tensor.wrap(a.array * b.array, dtype)


def scale(a: Tensor, factor: float) -> Tensor:
    return Tensor.wrap(a.array * a.dtype.numpy_dtype.type(factor), a.dtype)


def add_bias(a: Tensor, bias: Tensor) -> Tensor:
    """Add a vector along the trailing axis."""
    dtype = _common_dtype(a, bias)
    if bias.ndim != 1 or a.ndim == 0 or a.shape[-1] != bias.shape[0]:
        raise DimensionMismatch(f"add_bias: bias {bias.shape} does not fit {a.shape}")
    return Tensor.wrap(a.array + bias.array, dtype)


def mul_scalar(a: Tensor, s: Tensor) -> Tensor:
    """Multiply every element by the single value held in s."""
    dtype = _common_dtype(a, s)
    if s.size != 1:
        raise DimensionMismatch(f"mul_scalar: expected one value, got shape {s.shape}")
    return Tensor.wrap(a.array * s.array.reshape(()), dtype)


def relu(x: Tensor) -> Tensor:
    return Tensor.wrap(np.maximum(x.array, 0), x.dtype)


def gelu_arrays(x: np.ndarray) -> np.ndarray:
    return x * 0.5 * (1.0 + special.erf(x / np.sqrt(2.0)))


def gelu(x: Tensor) -> Tensor:
    """Exact GELU, x * Phi(x)."""
    return Tensor.wrap(gelu_arrays(x.array), x.dtype)


def sigmoid(x: Tensor) -> Tensor:
    return Tensor.wrap(special.expit(x.array), x.dtype)


def softmax_arrays(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def softmax(x: Tensor) -> Tensor:
    """Max-subtracted softmax over the trailing axis."""
    if x.ndim == 0 or x.shape[-1] < 1:
        raise DimensionMismatch("softmax needs a non-empty trailing axis")
    return Tensor.wrap(softmax_arrays(x.array), x.dtype)


# Convolution and pooling

def pad_spatial(x: np.ndarray, pad: int, value: float) -> np.ndarray:
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (pad, pad), (pad, pad)), constant_values=value)


def window(padded: np.ndarray, channel, i: int, j: int, stride: int,
           out_h: int, out_w: int) -> np.ndarray:
    """The strided view read by kernel tap (i, j)."""
    return padded[channel, i:i + stride * (out_h - 1) + 1:stride, j:j + stride * (out_w - 1) + 1:stride]


def conv2d_arrays(padded: np.ndarray, kernel: np.ndarray, stride: int,
                  out_h: int, out_w: int) -> np.ndarray:
    c_out, c_in, k, _ = kernel.shape
    out = np.zeros((c_out, out_h, out_w), dtype=padded.dtype)
    for c in range(c_in):
        for i in range(k):
            for j in range(k):
                out += kernel[:, c, i, j][:, None, None] * window(padded, c, i, j, stride, out_h, out_w)[None]
    return out


def check_conv(x: Tensor, kernel: Tensor, bias, stride: int, pad: int) -> tuple[int, int]:
    if x.ndim != 3 or kernel.ndim != 4:
        raise DimensionMismatch(f"conv2d: expected C×H×W input and 4-D kernel, got {x.shape}, {kernel.shape}")
    c_in, h, w = x.shape
    c_out, k_in, kh, kw = kernel.shape
    if k_in != c_in:
        raise DimensionMismatch(f"conv2d: kernel expects {k_in} input channels, input has {c_in}")
    if kh != kw:
        raise DimensionMismatch(f"conv2d: kernel must be square, got {kh}×{kw}")
    if stride < 1 or pad < 0:
        raise DimensionMismatch(f"conv2d: invalid stride {stride} or pad {pad}")
    if h + 2 * pad < kh or w + 2 * pad < kw:
        raise DimensionMismatch(f"conv2d: {kh}×{kw} kernel does not fit padded {h}×{w} input")
    if bias is not None and bias.shape != (c_out,):
        raise DimensionMismatch(f"conv2d: bias shape {bias.shape} does not match {c_out} outputs")
    return output_size(h, kh, stride, pad), output_size(w, kw, stride, pad)


def conv2d(x: Tensor, kernel: Tensor, bias: Tensor | None = None, stride: int = 1, pad: int = 0) -> Tensor:
    """2-D cross-correlation with zero padding (no kernel flip)."""
    dtype = _common_dtype(x, kernel, *([bias] if bias is not None else []))
    out_h, out_w = check_conv(x, kernel, bias, stride, pad)
    out = conv2d_arrays(pad_spatial(x.array, pad, 0.0), kernel.array, stride, out_h, out_w)
    if bias is not None:
        out += bias.array[:, None, None]
    return Tensor.wrap(out, dtype)


def maxpool_arrays(padded: np.ndarray, k: int, stride: int, out_h: int, out_w: int):
    """Window maxima plus the index of the first tap that attains each maximum."""
    channels = padded.shape[0]
    out = np.full((channels, out_h, out_w), -np.inf, dtype=padded.dtype)
    winner = np.zeros((channels, out_h, out_w), dtype=np.int64)
    for i in range(k):
        for j in range(k):
            view = window(padded, slice(None), i, j, stride, out_h, out_w)
            better = view > out
            out = np.where(better, view, out)
            winner = np.where(better, i * k + j, winner)
    return out, winner


def check_pool(x: Tensor, k: int, stride: int, pad: int) -> tuple[int, int]:
    if x.ndim != 3:
        raise DimensionMismatch(f"maxpool2d: expected C×H×W input, got {x.shape}")
    if k < 1 or stride < 1 or not 0 <= pad < k:
        raise DimensionMismatch(f"maxpool2d: invalid k={k}, stride={stride}, pad={pad} (need pad < k)")
    _, h, w = x.shape
    if h + 2 * pad < k or w + 2 * pad < k:
        raise DimensionMismatch(f"maxpool2d: window {k} does not fit padded {h}×{w} input")
    return output_size(h, k, stride, pad), output_size(w, k, stride, pad)


def maxpool2d(x: Tensor, k: int, stride: int, pad: int = 0) -> Tensor:
    """Per-window maximum; padded cells hold -inf so they never win."""
    out_h, out_w = check_pool(x, k, stride, pad)
    out, _ = maxpool_arrays(pad_spatial(x.array, pad, -np.inf), k, stride, out_h, out_w)
    return Tensor.wrap(out, x.dtype)


# Normalization

def batch_norm_arrays(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray,
                      mean: np.ndarray, var: np.ndarray, eps: float):
    std = np.sqrt(var + x.dtype.type(eps))
    x_hat = (x - mean[:, None, None]) / std[:, None, None]
    return x_hat * gamma[:, None, None] + beta[:, None, None], x_hat, std


def batch_norm_eval(x: Tensor, p: BatchNormParams) -> Tensor:
    """(x - mean) / sqrt(var + eps) * gamma + beta, per channel."""
    dtype = _common_dtype(x, p.gamma, p.beta, p.running_mean, p.running_var)
    if x.ndim != 3 or x.shape[0] != p.channels:
        raise DimensionMismatch(f"batch_norm: {p.channels} channels cannot normalize {x.shape}")
    out, _, _ = batch_norm_arrays(x.array, p.gamma.array, p.beta.array,
                                  p.running_mean.array, p.running_var.array, p.eps)
    return Tensor.wrap(out, dtype)


def layer_norm_arrays(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float):
    mean = x.mean(axis=-1, keepdims=True)
    centered = x - mean
    var = (centered * centered).mean(axis=-1, keepdims=True)
    std = np.sqrt(var + x.dtype.type(eps))
    x_hat = centered / std
    return x_hat * gamma + beta, x_hat, std


def layer_norm(x: Tensor, p: LayerNormParams) -> Tensor:
    """Normalize the trailing axis with the biased variance, then apply the affine."""
    dtype = _common_dtype(x, p.gamma, p.beta)
    if x.ndim == 0 or x.shape[-1] != p.features:
        raise DimensionMismatch(f"layer_norm: {p.features} features cannot normalize {x.shape}")
    out, _, _ = layer_norm_arrays(x.array, p.gamma.array, p.beta.array, p.eps)
    return Tensor.wrap(out, dtype)


# Reductions and layout

def _axes(ndim: int, axis) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    return tuple(a % ndim for a in axes)


def mean(x: Tensor, axis=None) -> Tensor:
    """Mean over the given axes (all axes when None)."""
    axes = _axes(x.ndim, axis)
    if any(x.shape[a] == 0 for a in axes):
        raise DimensionMismatch(f"mean over an empty axis of {x.shape}")
    return Tensor.wrap(np.asarray(x.array.mean(axis=axes)), x.dtype)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    if int(np.prod(shape)) != x.size:
        raise DimensionMismatch(f"reshape: cannot view {x.shape} as {tuple(shape)}")
    return Tensor.wrap(x.array.reshape(tuple(shape)), x.dtype)


def permute(x: Tensor, axes: Sequence[int]) -> Tensor:
    if sorted(axes) != list(range(x.ndim)):
        raise DimensionMismatch(f"permute: {tuple(axes)} is not a permutation of {x.ndim} axes")
    return Tensor.wrap(np.transpose(x.array, tuple(axes)).copy(), x.dtype)


def concat(xs: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not xs:
        raise DimensionMismatch("concat needs at least one tensor")
    dtype = _common_dtype(*xs)
    try:
        return Tensor.wrap(np.concatenate([x.array for x in xs], axis=axis), dtype)
    except ValueError as error:
        raise DimensionMismatch(f"concat: {error}") from error


def stack(xs: Sequence[Tensor]) -> Tensor:
    """Stack equally shaped tensors along a new leading axis."""
    if not xs:
        raise DimensionMismatch("stack needs at least one tensor")
    dtype = _common_dtype(*xs)
    if len({x.shape for x in xs}) != 1:
        raise DimensionMismatch("stack: tensors differ in shape")
    return Tensor.wrap(np.stack([x.array for x in xs]), dtype)


def slice_axis(x: Tensor, axis: int, start: int, stop: int) -> Tensor:
    axis %= x.ndim
    if not 0 <= start <= stop <= x.shape[axis]:
        raise DimensionMismatch(f"slice [{start}:{stop}] outside axis of length {x.shape[axis]}")
    index = [slice(None)] * x.ndim
    index[axis] = slice(start, stop)
    return Tensor.wrap(x.array[tuple(index)].copy(), x.dtype)


def gather_rows(table: Tensor, ids: Sequence[int]) -> Tensor:
    if table.ndim != 2:
        raise DimensionMismatch(f"gather_rows: table must be 2-D, got {table.shape}")
    if any(not 0 <= i < table.shape[0] for i in ids):
        raise DimensionMismatch(f"gather_rows: id outside table of {table.shape[0]} rows")
    return Tensor.wrap(table.array[np.asarray(ids, dtype=np.int64)], table.dtype)


def select(x: Tensor, index: int) -> Tensor:
    """The scalar at position index of a vector."""
    if x.ndim != 1 or not 0 <= index < x.shape[0]:
        raise DimensionMismatch(f"select: index {index} outside vector {x.shape}")
    return Tensor.wrap(np.asarray(x.array[index]), x.dtype)


# Loss

BCE_CLAMP = 1e-7


def bce_loss(probs: Tensor, labels: Tensor) -> Tensor:
    """Mean binary cross-entropy over every entry, probabilities clamped to [1e-7, 1-1e-7]."""
    dtype = _common_dtype(probs, labels)
    _same_shape(probs, labels, "bce_loss")
    p = np.clip(probs.array.astype(np.float64), BCE_CLAMP, 1.0 - BCE_CLAMP)
    y = labels.array.astype(np.float64)
    losses = -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
    return Tensor.wrap(np.asarray(losses.mean()), dtype)
