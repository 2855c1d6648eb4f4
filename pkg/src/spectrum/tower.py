"""Hierarchical attention over a square spectrum.

The spectrum is cut into a 4×4 grid of S×S blocks. Each block holds sub²
tokens, one per (S/sub)×(S/sub) sub-patch. Tokens attend within their block;
between levels, 2×2 neighbourhoods of blocks are merged by conv, layer norm
and max pooling, giving 16, 4 and finally 1 block.
"""

from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from src.errors import BadLayer, BadShape
from src.tensor.attention import AttentionParams, init_attention, multi_head_attention
from src.tensor.backend import EAGER, Ops
from src.tensor.tensor import DType, LayerNormParams, Tensor, ones, randn, zeros

LAYERS = 3
GRID = 4


@dataclass(frozen=True)
class SpectrumTowerConfig:
    side: int = 64
    d: int = 64
    heads: int = 4
    sub: int = 4

    def __post_init__(self):
        if self.side <= 0 or self.side % GRID != 0:
            raise BadShape(f"spectrum side {self.side} is not a positive multiple of {GRID}")
        if self.sub <= 0 or self.patch % self.sub != 0:
            raise BadShape(f"patch side {self.patch} is not divisible by sub={self.sub}")
        if self.heads <= 0 or self.d % self.heads != 0:
            raise BadShape(f"width {self.d} is not divisible by {self.heads} heads")

    @property
    def patch(self) -> int:
        """S, the side of each of the 16 patches."""
        return self.side // GRID

    @property
    def sub_side(self) -> int:
        return self.patch // self.sub

    @property
    def tokens(self) -> int:
        return self.sub * self.sub

    @property
    def token_dim(self) -> int:
        return self.sub_side * self.sub_side


@dataclass
class PatchGrid:
    """Blocks of one pyramid level in raster order, each a tokens×d value."""

    layer: int
    rows: int
    cols: int
    blocks: list[Any]

    def block(self, row: int, col: int):
        return self.blocks[row * self.cols + col]


@dataclass
class AttentionMaps:
    """Per level, per block: heads×n×n row-stochastic attention weights."""

    layers: dict[int, list[Tensor]] = field(default_factory=dict)

    def counts(self) -> dict[int, int]:
        return {layer: len(blocks) for layer, blocks in self.layers.items()}


def init_tower(rng: np.random.Generator, cfg: SpectrumTowerConfig, dtype: DType = DType.F32) -> dict[str, Tensor]:
    state = {
        "audio.embed.weight": randn(rng, (cfg.token_dim, cfg.d), 1.0 / np.sqrt(cfg.token_dim), dtype),
        "audio.embed.bias": zeros((cfg.d,), dtype),
        "audio.pos": randn(rng, (cfg.tokens, cfg.d), 0.02, dtype),
    }
    for layer in range(1, LAYERS + 1):
        state.update(init_attention(rng, f"audio.layer{layer}.attn", cfg.d, dtype))
        state[f"audio.layer{layer}.ln.gamma"] = ones((cfg.d,), dtype)
        state[f"audio.layer{layer}.ln.beta"] = zeros((cfg.d,), dtype)
    for layer in range(1, LAYERS):
        state[f"audio.agg{layer}.conv.weight"] = randn(rng, (cfg.d, cfg.d, 3, 3), 1.0 / np.sqrt(9 * cfg.d), dtype)
        state[f"audio.agg{layer}.conv.bias"] = zeros((cfg.d,), dtype)
        state[f"audio.agg{layer}.ln.gamma"] = ones((cfg.d,), dtype)
        state[f"audio.agg{layer}.ln.beta"] = zeros((cfg.d,), dtype)
    return state


def partition_patches(spectrum, cfg: SpectrumTowerConfig, params: Mapping[str, Any], ops: Ops = EAGER) -> PatchGrid:
    """Embed the sub-patches of each of the 16 patches as tokens."""
    if tuple(spectrum.shape) != (cfg.side, cfg.side):
        raise BadShape(f"expected a {cfg.side}×{cfg.side} spectrum, got {tuple(spectrum.shape)}")
    sub, q = cfg.sub, cfg.sub_side
    # (patch row, sub row, pixel row, patch col, sub col, pixel col)
    cells = ops.reshape(spectrum, (GRID, sub, q, GRID, sub, q))
    cells = ops.permute(cells, (0, 3, 1, 4, 2, 5))
    flat = ops.reshape(cells, (GRID * GRID * cfg.tokens, cfg.token_dim))
    embedded = ops.add_bias(ops.matmul(flat, params["audio.embed.weight"]), params["audio.embed.bias"])
    blocks = []
    for b in range(GRID * GRID):
        rows = ops.slice_axis(embedded, 0, b * cfg.tokens, (b + 1) * cfg.tokens)
        blocks.append(ops.add(rows, params["audio.pos"]))
    return PatchGrid(1, GRID, GRID, blocks)


def layer_params(params: Mapping[str, Any], layer: int) -> tuple[AttentionParams, LayerNormParams]:
    prefix = f"audio.layer{layer}"
    return (AttentionParams.from_state(params, f"{prefix}.attn"),
            LayerNormParams(params[f"{prefix}.ln.gamma"], params[f"{prefix}.ln.beta"]))


def transformer_layer(tokens, attention: AttentionParams, norm: LayerNormParams, heads: int, ops: Ops = EAGER):
    """GELU(LN(x + MSA(x))); returns the new tokens and the attention weights."""
    mixed, weights = multi_head_attention(tokens, attention, heads, ops)
    return ops.gelu(ops.layer_norm(ops.add(tokens, mixed), norm)), weights


def _block_map(ops: Ops, tokens, sub: int, d: int):
    return ops.permute(ops.reshape(tokens, (sub, sub, d)), (2, 0, 1))


def aggregate(grid: PatchGrid, cfg: SpectrumTowerConfig, params: Mapping[str, Any], ops: Ops = EAGER) -> PatchGrid:
    """Merge every 2×2 neighbourhood of blocks: MaxPool(LN(Conv(tiled)))."""
    if grid.layer >= LAYERS:
        raise BadLayer(f"layer {grid.layer} is the top of the pyramid")
    prefix = f"audio.agg{grid.layer}"
    kernel, bias = params[f"{prefix}.conv.weight"], params[f"{prefix}.conv.bias"]
    norm = LayerNormParams(params[f"{prefix}.ln.gamma"], params[f"{prefix}.ln.beta"])
    sub, d = cfg.sub, cfg.d
    merged = []
    for row in range(0, grid.rows, 2):
        for col in range(0, grid.cols, 2):
            top = ops.concat([_block_map(ops, grid.block(row, col), sub, d),
                              _block_map(ops, grid.block(row, col + 1), sub, d)], axis=2)
            bottom = ops.concat([_block_map(ops, grid.block(row + 1, col), sub, d),
                                 _block_map(ops, grid.block(row + 1, col + 1), sub, d)], axis=2)
            tiled = ops.concat([top, bottom], axis=1)
            conv = ops.conv2d(tiled, kernel, bias, stride=1, pad=1)
            normed = ops.permute(ops.layer_norm(ops.permute(conv, (1, 2, 0)), norm), (2, 0, 1))
            pooled = ops.maxpool2d(normed, 3, 2, 1)
            merged.append(ops.reshape(ops.permute(pooled, (1, 2, 0)), (cfg.tokens, d)))
    return PatchGrid(grid.layer + 1, grid.rows // 2, grid.cols // 2, merged)


def forward_tower(spectrum, cfg: SpectrumTowerConfig, params: Mapping[str, Any], ops: Ops = EAGER):
    """Run the three-level pyramid; returns the d-vector feature and every attention map."""
    grid = partition_patches(spectrum, cfg, params, ops)
    maps = AttentionMaps()
    for layer in range(1, LAYERS + 1):
        attention, norm = layer_params(params, layer)
        outputs = []
        maps.layers[layer] = []
        for tokens in grid.blocks:
            out, weights = transformer_layer(tokens, attention, norm, cfg.heads, ops)
            outputs.append(out)
            maps.layers[layer].append(ops.value(weights))
        grid = PatchGrid(grid.layer, grid.rows, grid.cols, outputs)
        if layer < LAYERS:
            grid = aggregate(grid, cfg, params, ops)
    return ops.mean(grid.blocks[0], axis=0), maps
