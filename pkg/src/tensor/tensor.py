"""Immutable dense tensors and normalization parameter bundles."""

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from src.errors import DimensionMismatch, NonFiniteError


class DType(enum.Enum):
    """Supported element types; the value is the FVT1 dtype code."""

    F32 = 0
    F64 = 1

    @property
    def numpy_dtype(self) -> np.dtype:
        return np.dtype(np.float32) if self is DType.F32 else np.dtype(np.float64)

    @classmethod
    def of(cls, array: np.ndarray) -> "DType":
        return cls.F64 if array.dtype == np.float64 else cls.F32


class Tensor:
    """A dense row-major array that cannot be modified once constructed.

    Every constructor rejects NaN and infinity, so no non-finite value can
    travel between operations.
    """

    __slots__ = ("_array", "_dtype")

    def __init__(self, data, dtype: DType = DType.F32):
        self._init(np.array(data, dtype=dtype.numpy_dtype), dtype)

    @classmethod
    def wrap(cls, array: np.ndarray, dtype: DType) -> "Tensor":
        """Adopt a freshly computed array without copying it."""
        tensor = cls.__new__(cls)
        tensor._init(np.require(array, dtype=dtype.numpy_dtype, requirements="C"), dtype)
        return tensor

    @classmethod
    def from_numpy(cls, array: np.ndarray) -> "Tensor":
        """Copy an array, keeping float64 as F64 and mapping everything else to F32."""
        return cls(array, DType.of(np.asarray(array)))

    def _init(self, array: np.ndarray, dtype: DType):
        if array.size and not np.isfinite(array).all():
            raise NonFiniteError(f"non-finite values in tensor of shape {array.shape}")
        array.flags.writeable = False
        self._array = array
        self._dtype = dtype

    @property
    def array(self) -> np.ndarray:
        """Read-only view of the values."""
        return self._array

    @property
    def dtype(self) -> DType:
        return self._dtype

    @property
    def shape(self) -> tuple[int, ...]:
        return self._array.shape

    @property
    def ndim(self) -> int:
        return self._array.ndim

    @property
    def size(self) -> int:
        return self._array.size

    def item(self) -> float:
        if self.size != 1:
            raise DimensionMismatch(f"item() needs a single value, tensor has shape {self.shape}")
        return float(self._array.reshape(-1)[0])

    def tolist(self):
        return self._array.tolist()

    def astype(self, dtype: DType) -> "Tensor":
        if dtype is self._dtype:
            return self
        return Tensor(self._array, dtype)

    def reshape(self, *shape: int) -> "Tensor":
        return Tensor.wrap(self._array.reshape(shape), self._dtype)

    def equals(self, other: "Tensor") -> bool:
        """Bitwise equality of dtype, shape and payload."""
        return (self._dtype is other.dtype and self.shape == other.shape
                and self._array.tobytes() == other.array.tobytes())

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self._dtype.name})"


def zeros(shape: Sequence[int], dtype: DType = DType.F32) -> Tensor:
    return Tensor.wrap(np.zeros(tuple(shape)), dtype)


def ones(shape: Sequence[int], dtype: DType = DType.F32) -> Tensor:
    return Tensor.wrap(np.ones(tuple(shape)), dtype)


def full(shape: Sequence[int], value: float, dtype: DType = DType.F32) -> Tensor:
    return Tensor.wrap(np.full(tuple(shape), value), dtype)


def eye(n: int, dtype: DType = DType.F32) -> Tensor:
    return Tensor.wrap(np.eye(n), dtype)


def randn(rng: np.random.Generator, shape: Iterable[int], scale: float = 1.0,
          dtype: DType = DType.F32) -> Tensor:
    """Normal samples drawn in float64 and then cast, so F32 and F64 share a stream."""
    return Tensor.wrap(rng.standard_normal(tuple(shape)) * scale, dtype)


def uniform(rng: np.random.Generator, shape: Iterable[int], low: float, high: float,
            dtype: DType = DType.F32) -> Tensor:
    return Tensor.wrap(rng.uniform(low, high, tuple(shape)), dtype)


def _vector_length(value, field: str) -> int:
    shape = value.shape
    if len(shape) != 1:
        raise DimensionMismatch(f"{field} must be a vector, got shape {shape}")
    return shape[0]


@dataclass(frozen=True)
class BatchNormParams:
    """Per-channel batch-norm affine and running statistics.

    Any field may be a graph node during training; the running statistics
    then arrive as constant nodes and are read by value.
    """

    gamma: Tensor
    beta: Tensor
    running_mean: Tensor
    running_var: Tensor
    eps: float = 1e-5

    def __post_init__(self):
        lengths = {_vector_length(getattr(self, name), name)
                   for name in ("gamma", "beta", "running_mean", "running_var")}
        if len(lengths) != 1:
            raise DimensionMismatch("batch-norm vectors must share one channel count")
        if (self.running_var.array < 0).any():
            raise DimensionMismatch("running_var must be non-negative")
        if self.eps < 0:
            raise DimensionMismatch("eps must be non-negative")

    @property
    def channels(self) -> int:
        return self.gamma.shape[0]

    @classmethod
    def identity(cls, channels: int, dtype: DType = DType.F32, eps: float = 0.0) -> "BatchNormParams":
        """gamma=1, beta=0, mean=0, var=1: the identity map when eps is 0."""
        return cls(ones((channels,), dtype), zeros((channels,), dtype),
                   zeros((channels,), dtype), ones((channels,), dtype), eps)


@dataclass(frozen=True)
class LayerNormParams:
    """Affine parameters of a layer norm over the trailing feature dimension."""

    gamma: Tensor
    beta: Tensor
    eps: float = 1e-5

    def __post_init__(self):
        if _vector_length(self.gamma, "gamma") != _vector_length(self.beta, "beta"):
            raise DimensionMismatch("layer-norm gamma and beta lengths differ")

    @property
    def features(self) -> int:
        return self.gamma.shape[0]
