"""Six-block visual stack with structural reparameterization.

Training blocks sum a 3×3 conv+BN branch, a 1×1 conv+BN branch and, when
shapes allow, a BN-only identity branch before the ReLU. Because conv and
eval-mode BN are both affine, the three branches collapse into one 3×3 conv
with bias that produces the same pre-activation.
"""

from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from src.errors import AlreadyFused, ConfigError, DimensionMismatch
from src.tensor.backend import EAGER, Ops
from src.tensor.ops import output_size
from src.tensor.tensor import BatchNormParams, DType, Tensor, ones, randn, uniform, zeros

BLOCKS = 6
BUFFER_SUFFIXES = (".running_mean", ".running_var")
MODES = ("train", "fused")


@dataclass(frozen=True)
class LayerSpec:
    c_in: int
    c_out: int
    stride: int = 1

    @property
    def has_identity(self) -> bool:
        return self.c_in == self.c_out and self.stride == 1


DEFAULT_LAYERS = (
    LayerSpec(3, 16, 2), LayerSpec(16, 32, 2), LayerSpec(32, 32, 1),
    LayerSpec(32, 64, 2), LayerSpec(64, 64, 1), LayerSpec(64, 128, 2),
)


@dataclass(frozen=True)
class VisionNetConfig:
    layers: tuple[LayerSpec, ...] = DEFAULT_LAYERS
    side: int = 64

    def __post_init__(self):
        if len(self.layers) != BLOCKS:
            raise ConfigError(f"the visual stack has exactly {BLOCKS} layers, got {len(self.layers)}")
        for prev, layer in zip(self.layers, self.layers[1:]):
            if prev.c_out != layer.c_in:
                raise ConfigError(f"channel chain breaks: {prev.c_out} feeds a {layer.c_in}-channel layer")
        if any(l.c_in <= 0 or l.c_out <= 0 or l.stride <= 0 for l in self.layers):
            raise ConfigError("channel counts and strides must be positive")
        if self.side <= 0:
            raise ConfigError(f"input side must be positive, got {self.side}")

    @property
    def in_channels(self) -> int:
        return self.layers[0].c_in

    @property
    def feature_dim(self) -> int:
        return self.layers[-1].c_out

    def spatial_sides(self) -> list[int]:
        """Output side after each block."""
        sides, side = [], self.side
        for layer in self.layers:
            side = output_size(side, 3, layer.stride, 1)
            sides.append(side)
        return sides


@dataclass(frozen=True)
class TrainBlockParams:
    conv3: Any
    bn3: BatchNormParams
    conv1: Any
    bn1: BatchNormParams
    bn_id: BatchNormParams | None
    stride: int

    def __post_init__(self):
        c_out, c_in = self.conv3.shape[:2]
        if tuple(self.conv3.shape[2:]) != (3, 3) or tuple(self.conv1.shape) != (c_out, c_in, 1, 1):
            raise DimensionMismatch(f"branch kernels {self.conv3.shape} and {self.conv1.shape} disagree")
        if self.bn3.channels != c_out or self.bn1.channels != c_out:
            raise DimensionMismatch(f"branch batch norms must cover {c_out} channels")
        if self.bn_id is not None and (c_in != c_out or self.stride != 1 or self.bn_id.channels != c_out):
            raise DimensionMismatch("identity branch needs equal channels and stride 1")

    @classmethod
    def from_state(cls, state: Mapping[str, Any], index: int, spec: LayerSpec) -> "TrainBlockParams":
        prefix = f"vision.block{index}"
        return cls(state[f"{prefix}.conv3"], _bn(state, f"{prefix}.bn3"),
                   state[f"{prefix}.conv1"], _bn(state, f"{prefix}.bn1"),
                   _bn(state, f"{prefix}.bn_id") if spec.has_identity else None, spec.stride)


@dataclass(frozen=True)
class FusedBlockParams:
    kernel: Tensor
    bias: Tensor
    stride: int

    def __post_init__(self):
        if len(self.kernel.shape) != 4 or tuple(self.kernel.shape[2:]) != (3, 3):
            raise DimensionMismatch(f"fused kernel must be C_out×C_in×3×3, got {self.kernel.shape}")
        if tuple(self.bias.shape) != (self.kernel.shape[0],):
            raise DimensionMismatch(f"fused bias {self.bias.shape} does not match kernel {self.kernel.shape}")

    @classmethod
    def from_state(cls, state: Mapping[str, Any], index: int, spec: LayerSpec) -> "FusedBlockParams":
        prefix = f"vision.block{index}"
        return cls(state[f"{prefix}.kernel"], state[f"{prefix}.bias"], spec.stride)


def _bn(state: Mapping[str, Any], prefix: str) -> BatchNormParams:
    return BatchNormParams(state[f"{prefix}.gamma"], state[f"{prefix}.beta"],
                           state[f"{prefix}.running_mean"], state[f"{prefix}.running_var"])


def is_buffer(name: str) -> bool:
    return name.endswith(BUFFER_SUFFIXES)


def _init_bn(rng: np.random.Generator, prefix: str, channels: int, dtype: DType, random_stats: bool):
    if random_stats:
        return {f"{prefix}.gamma": uniform(rng, (channels,), 0.5, 1.5, dtype),
                f"{prefix}.beta": randn(rng, (channels,), 0.1, dtype),
                f"{prefix}.running_mean": randn(rng, (channels,), 0.1, dtype),
                f"{prefix}.running_var": uniform(rng, (channels,), 0.5, 1.5, dtype)}
    return {f"{prefix}.gamma": ones((channels,), dtype), f"{prefix}.beta": zeros((channels,), dtype),
            f"{prefix}.running_mean": zeros((channels,), dtype), f"{prefix}.running_var": ones((channels,), dtype)}


def init_vision(rng: np.random.Generator, cfg: VisionNetConfig, dtype: DType = DType.F32,
                random_stats: bool = False) -> dict[str, Tensor]:
    """Train-mode parameters and BN buffers; random_stats draws non-trivial BN statistics."""
    state = {}
    for index, spec in enumerate(cfg.layers):
        prefix = f"vision.block{index}"
        state[f"{prefix}.conv3"] = randn(rng, (spec.c_out, spec.c_in, 3, 3), np.sqrt(2.0 / (9 * spec.c_in)), dtype)
        state.update(_init_bn(rng, f"{prefix}.bn3", spec.c_out, dtype, random_stats))
        state[f"{prefix}.conv1"] = randn(rng, (spec.c_out, spec.c_in, 1, 1), np.sqrt(2.0 / spec.c_in), dtype)
        state.update(_init_bn(rng, f"{prefix}.bn1", spec.c_out, dtype, random_stats))
        if spec.has_identity:
            state.update(_init_bn(rng, f"{prefix}.bn_id", spec.c_out, dtype, random_stats))
    return state


def blocks_from_state(state: Mapping[str, Any], cfg: VisionNetConfig, mode: str) -> list:
    block_type = TrainBlockParams if mode == "train" else FusedBlockParams
    return [block_type.from_state(state, index, spec) for index, spec in enumerate(cfg.layers)]


def block_forward_train(x, p: TrainBlockParams, ops: Ops = EAGER):
    """ReLU(BN3(conv3(x)) + BN1(conv1(x)) + BN_id(x))."""
    out = ops.add(ops.batch_norm(ops.conv2d(x, p.conv3, None, p.stride, 1), p.bn3),
                  ops.batch_norm(ops.conv2d(x, p.conv1, None, p.stride, 0), p.bn1))
    if p.bn_id is not None:
        out = ops.add(out, ops.batch_norm(x, p.bn_id))
    return ops.relu(out)


def block_forward_fused(x, p: FusedBlockParams, ops: Ops = EAGER):
    return ops.relu(ops.conv2d(x, p.kernel, p.bias, p.stride, 1))


def block_forward(x, p, ops: Ops = EAGER):
    if isinstance(p, TrainBlockParams):
        return block_forward_train(x, p, ops)
    return block_forward_fused(x, p, ops)


def fold_bn(kernel: Tensor, bn: BatchNormParams) -> tuple[Tensor, Tensor]:
    """Fold eval-mode BN into the preceding bias-free conv."""
    if bn.channels != kernel.shape[0]:
        raise DimensionMismatch(f"batch norm over {bn.channels} channels cannot fold into {kernel.shape}")
    t = bn.gamma.array / np.sqrt(bn.running_var.array + kernel.array.dtype.type(bn.eps))
    folded = kernel.array * t[:, None, None, None]
    bias = bn.beta.array - bn.running_mean.array * t
    return Tensor.wrap(folded, kernel.dtype), Tensor.wrap(bias, kernel.dtype)


def pad_1x1_to_3x3(kernel: Tensor) -> Tensor:
    if tuple(kernel.shape[2:]) != (1, 1):
        raise DimensionMismatch(f"expected a 1×1 kernel, got {kernel.shape}")
    return Tensor.wrap(np.pad(kernel.array, ((0, 0), (0, 0), (1, 1), (1, 1))), kernel.dtype)


def identity_to_3x3(channels: int, dtype: DType = DType.F32) -> Tensor:
    """Dirac kernel: 1 at (c, c, 1, 1)."""
    kernel = np.zeros((channels, channels, 3, 3))
    kernel[np.arange(channels), np.arange(channels), 1, 1] = 1.0
    return Tensor.wrap(kernel, dtype)


def fuse_block(p: TrainBlockParams) -> FusedBlockParams:
    if isinstance(p, FusedBlockParams):
        raise AlreadyFused("block is already single-branch")
    kernel3, bias3 = fold_bn(p.conv3, p.bn3)
    kernel1, bias1 = fold_bn(p.conv1, p.bn1)
    kernel = kernel3.array + pad_1x1_to_3x3(kernel1).array
    bias = bias3.array + bias1.array
    if p.bn_id is not None:
        kernel_id, bias_id = fold_bn(identity_to_3x3(p.conv3.shape[0], p.conv3.dtype), p.bn_id)
        kernel = kernel + kernel_id.array
        bias = bias + bias_id.array
    return FusedBlockParams(Tensor.wrap(kernel, p.conv3.dtype), Tensor.wrap(bias, p.conv3.dtype), p.stride)


def fuse_network(blocks: Sequence[TrainBlockParams]) -> list[FusedBlockParams]:
    return [fuse_block(block) for block in blocks]


def fused_state(blocks: Sequence[FusedBlockParams]) -> dict[str, Tensor]:
    state = {}
    for index, block in enumerate(blocks):
        state[f"vision.block{index}.kernel"] = block.kernel
        state[f"vision.block{index}.bias"] = block.bias
    return state


def vision_forward(frame, blocks: Sequence, ops: Ops = EAGER):
    x = frame
    for block in blocks:
        x = block_forward(x, block, ops)
    return x


def _feature_dim(blocks: Sequence) -> int:
    last = blocks[-1]
    return (last.conv3 if isinstance(last, TrainBlockParams) else last.kernel).shape[0]


def frame_features(frames: Sequence, blocks: Sequence, ops: Ops = EAGER, dtype: DType = DType.F32):
    """Global-average-pooled block output per frame, n_frames × feature_dim."""
    if not frames:
        return ops.constant(zeros((0, _feature_dim(blocks)), dtype))
    shapes = {tuple(frame.shape) for frame in frames}
    if len(shapes) != 1:
        raise DimensionMismatch(f"frames differ in shape: {sorted(shapes)}")
    pooled = [ops.mean(vision_forward(frame, blocks, ops), axis=(1, 2)) for frame in frames]
    return ops.stack(pooled)


@dataclass(frozen=True)
class LayerCounts:
    per_layer: tuple[int, ...]

    @property
    def total(self) -> int:
        return sum(self.per_layer)


def _check_mode(mode: str):
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")


def count_params(cfg: VisionNetConfig, mode: str) -> LayerCounts:
    """Parameter counts including BN running statistics in train mode."""
    _check_mode(mode)
    counts = []
    for spec in cfg.layers:
        weights = 9 * spec.c_in * spec.c_out
        if mode == "fused":
            counts.append(weights + spec.c_out)
        else:
            norms = 3 if spec.has_identity else 2
            counts.append(weights + spec.c_in * spec.c_out + 4 * spec.c_out * norms)
    return LayerCounts(tuple(counts))


def macs_per_output(spec: LayerSpec, mode: str) -> int:
    _check_mode(mode)
    if mode == "fused":
        return 9 * spec.c_in
    return 9 * spec.c_in + spec.c_in + (1 if spec.has_identity else 0)


def count_flops(cfg: VisionNetConfig, mode: str) -> LayerCounts:
    """Two FLOPs per multiply-accumulate for one frame."""
    sides = cfg.spatial_sides()
    return LayerCounts(tuple(2 * macs_per_output(spec, mode) * spec.c_out * side * side
                             for spec, side in zip(cfg.layers, sides)))
