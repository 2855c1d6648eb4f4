"""FVT1 binary tensor format.

Layout: magic ``FVT1``, one dtype byte (0=F32, 1=F64), one rank byte, two
reserved zero bytes, rank little-endian u32 dimensions, then the row-major
little-endian payload.
"""

import os
import struct

import numpy as np

from src.errors import TensorFormatError
from src.tensor.tensor import DType, Tensor

MAGIC = b"FVT1"
HEADER = struct.Struct("<4sBBH")
_LITTLE_ENDIAN = {DType.F32: np.dtype("<f4"), DType.F64: np.dtype("<f8")}


def encode(tensor: Tensor) -> bytes:
    if tensor.ndim > 255:
        raise TensorFormatError(f"rank {tensor.ndim} does not fit the FVT1 header")
    dims = struct.pack(f"<{tensor.ndim}I", *tensor.shape)
    payload = np.ascontiguousarray(tensor.array, dtype=_LITTLE_ENDIAN[tensor.dtype]).tobytes()
    return HEADER.pack(MAGIC, tensor.dtype.value, tensor.ndim, 0) + dims + payload


def decode(blob: bytes) -> Tensor:
    if len(blob) < HEADER.size:
        raise TensorFormatError("truncated FVT1 header")
    magic, dtype_code, rank, reserved = HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise TensorFormatError(f"bad magic {magic!r}")
    if reserved != 0:
        raise TensorFormatError("reserved header bytes are not zero")
    try:
        dtype = DType(dtype_code)
    except ValueError as error:
        raise TensorFormatError(f"unknown dtype code {dtype_code}") from error
    offset = HEADER.size + 4 * rank
    if len(blob) < offset:
        raise TensorFormatError("truncated FVT1 dimensions")
    shape = struct.unpack_from(f"<{rank}I", blob, HEADER.size)
    expected = int(np.prod(shape, dtype=np.int64)) * _LITTLE_ENDIAN[dtype].itemsize
    if len(blob) - offset != expected:
        raise TensorFormatError(f"payload holds {len(blob) - offset} bytes, shape {shape} needs {expected}")
    array = np.frombuffer(blob, dtype=_LITTLE_ENDIAN[dtype], offset=offset).reshape(shape)
    return Tensor(array, dtype)


def save(path: str, tensor: Tensor):
    directory = os.path.dirname(path)
    if directory and not os.path.exists(directory):
        os.makedirs(directory)
    with open(path, "wb") as f:
        f.write(encode(tensor))


def load(path: str) -> Tensor:
    with open(path, "rb") as f:
        return decode(f.read())
