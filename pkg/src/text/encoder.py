"""Text encoders.

Encoders share one interface so a pretrained model could replace the hashed
toy encoder without touching the fusion code.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

from src.errors import ConfigError, DimensionMismatch
from src.tensor.attention import AttentionParams, init_attention, multi_head_attention
from src.tensor.backend import EAGER, Ops
from src.tensor.tensor import DType, LayerNormParams, Tensor, ones, randn, zeros
from src.text.tokenizer import TokenSequence

FFN_EXPANSION = 4


@dataclass(frozen=True)
class TextEncoderConfig:
    vocab_size: int = 4096
    d_t: int = 64
    layers: int = 1
    heads: int = 4
    max_len: int = 512

    def __post_init__(self):
        if self.vocab_size <= 0 or self.d_t <= 0 or self.layers < 0 or self.max_len <= 0:
            raise ConfigError("text encoder sizes must be positive")
        if self.heads <= 0 or self.d_t % self.heads != 0:
            raise ConfigError(f"d_t={self.d_t} is not divisible by {self.heads} heads")


class TextEncoderBase(ABC):
    """
    Abstract base class for textual feature extractors.

    Implementations map a token sequence to one feature row per token, or to
    a single learned null row when the sequence is empty.
    """

    @abstractmethod
    def init_params(self, rng: np.random.Generator, dtype: DType = DType.F32) -> dict[str, Tensor]:
        """
        Create freshly initialized parameters.

        Returns:
            dict: parameter name to tensor, every name prefixed with "text."
        """
        pass

    @abstractmethod
    def encode(self, seq: TokenSequence, params: Mapping[str, Any], ops: Ops = EAGER):
        """
        Encode a token sequence.

        Args:
            seq: token ids, optionally with spans
            params: the mapping returned by init_params, or graph nodes for it
            ops: backend evaluating the forward pass

        Returns:
            max(1, len(seq)) × output_dim features
        """
        pass

    @abstractmethod
    def get_name(self) -> str:
        pass

    @property
    @abstractmethod
    def output_dim(self) -> int:
        pass


class HashedTextEncoder(TextEncoderBase):
    """Hashed-vocabulary embedding followed by pre-norm transformer blocks."""

    def __init__(self, cfg: TextEncoderConfig):
        self.cfg = cfg

    def get_name(self) -> str:
        return "hashed"

    @property
    def output_dim(self) -> int:
        return self.cfg.d_t

    def init_params(self, rng: np.random.Generator, dtype: DType = DType.F32) -> dict[str, Tensor]:
        d = self.cfg.d_t
        hidden = FFN_EXPANSION * d
        state = {
            "text.embed": randn(rng, (self.cfg.vocab_size, d), 0.1, dtype),
            "text.pos": randn(rng, (self.cfg.max_len, d), 0.02, dtype),
            "text.null": randn(rng, (1, d), 0.1, dtype),
        }
        for layer in range(self.cfg.layers):
            prefix = f"text.layer{layer}"
            for norm in ("ln1", "ln2"):
                state[f"{prefix}.{norm}.gamma"] = ones((d,), dtype)
                state[f"{prefix}.{norm}.beta"] = zeros((d,), dtype)
            state.update(init_attention(rng, f"{prefix}.attn", d, dtype))
            state[f"{prefix}.ffn.w1"] = randn(rng, (d, hidden), 1.0 / np.sqrt(d), dtype)
            state[f"{prefix}.ffn.b1"] = zeros((hidden,), dtype)
            state[f"{prefix}.ffn.w2"] = randn(rng, (hidden, d), 1.0 / np.sqrt(hidden), dtype)
            state[f"{prefix}.ffn.b2"] = zeros((d,), dtype)
        return state

    def encode(self, seq: TokenSequence, params: Mapping[str, Any], ops: Ops = EAGER):
        return encode_text(seq, self.cfg, params, ops)


def feed_forward(x, params: Mapping[str, Any], prefix: str, ops: Ops = EAGER):
    hidden = ops.gelu(ops.add_bias(ops.matmul(x, params[f"{prefix}.w1"]), params[f"{prefix}.b1"]))
    return ops.add_bias(ops.matmul(hidden, params[f"{prefix}.w2"]), params[f"{prefix}.b2"])


def encode_text(seq: TokenSequence, cfg: TextEncoderConfig, params: Mapping[str, Any], ops: Ops = EAGER):
    """x = embed + pos; per layer x += MHA(LN1(x)), x += FFN(LN2(x))."""
    if not seq.tokens:
        return params["text.null"]
    if any(not 0 <= token < cfg.vocab_size for token in seq.tokens):
        raise DimensionMismatch(f"token id outside vocabulary of {cfg.vocab_size}")
    positions = [min(i, cfg.max_len - 1) for i in range(len(seq.tokens))]
    x = ops.add(ops.gather_rows(params["text.embed"], list(seq.tokens)),
                ops.gather_rows(params["text.pos"], positions))
    for layer in range(cfg.layers):
        prefix = f"text.layer{layer}"
        ln1 = LayerNormParams(params[f"{prefix}.ln1.gamma"], params[f"{prefix}.ln1.beta"])
        ln2 = LayerNormParams(params[f"{prefix}.ln2.gamma"], params[f"{prefix}.ln2.beta"])
        mixed, _ = multi_head_attention(ops.layer_norm(x, ln1), AttentionParams.from_state(params, f"{prefix}.attn"),
                                        cfg.heads, ops)
        x = ops.add(x, mixed)
        x = ops.add(x, feed_forward(ops.layer_norm(x, ln2), params, f"{prefix}.ffn", ops))
    return x
