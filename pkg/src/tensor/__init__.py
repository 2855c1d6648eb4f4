"""Dense tensor mathematics."""

from src.tensor.tensor import BatchNormParams, DType, LayerNormParams, Tensor

__all__ = ['BatchNormParams', 'DType', 'LayerNormParams', 'Tensor']
