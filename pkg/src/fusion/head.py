"""Sequence encoders, weighted late fusion and the six-way emotion head."""

from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

from src.errors import ConfigError, DimensionMismatch
from src.tensor.attention import AttentionParams, init_attention, multi_head_attention
from src.tensor.backend import EAGER, Ops
from src.tensor.tensor import DType, LayerNormParams, Tensor, ones, randn, zeros
from src.text.encoder import feed_forward

EMOTIONS = 6
PROB_EPS = 1e-7
MODALITIES = ("visual", "acoustic", "text")
ENCODED = ("visual", "acoustic")

LABEL_SETS = {
    "iemocap": ("anger", "excitement", "frustration", "happiness", "neutral", "sadness"),
    "mosei": ("happiness", "sadness", "anger", "fear", "disgust", "surprise"),
}


@dataclass(frozen=True)
class FusionConfig:
    d_f: int = 64
    hidden: int = 128
    heads: int = 4
    label_set: str = "iemocap"
    max_len: int = 256

    def __post_init__(self):
        if self.label_set not in LABEL_SETS:
            raise ConfigError(f"unknown label set {self.label_set!r}, expected one of {sorted(LABEL_SETS)}")
        if self.d_f <= 0 or self.hidden <= 0 or self.max_len <= 0:
            raise ConfigError("fusion sizes must be positive")
        if self.heads <= 0 or self.d_f % self.heads != 0:
            raise ConfigError(f"d_f={self.d_f} is not divisible by {self.heads} heads")

    @property
    def labels(self) -> tuple[str, ...]:
        return LABEL_SETS[self.label_set]


@dataclass
class ModalityFeatures:
    """Per-modality feature sequences; visual or acoustic may have zero rows."""

    visual: Any
    acoustic: Any
    textual: Any


@dataclass(frozen=True)
class EmotionScores:
    probs: tuple[float, ...]
    label_set: str

    def __post_init__(self):
        if len(self.probs) != EMOTIONS:
            raise DimensionMismatch(f"expected {EMOTIONS} probabilities, got {len(self.probs)}")

    @property
    def labels(self) -> tuple[str, ...]:
        return LABEL_SETS[self.label_set]

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.labels, self.probs))


def init_fusion(rng: np.random.Generator, cfg: FusionConfig, widths: Mapping[str, int],
                dtype: DType = DType.F32) -> dict[str, Tensor]:
    """widths maps each modality to its incoming feature width."""
    d = cfg.d_f
    state = {}
    for modality in MODALITIES:
        width = widths[modality]
        state[f"fusion.proj.{modality}.weight"] = randn(rng, (width, d), 1.0 / np.sqrt(width), dtype)
        state[f"fusion.proj.{modality}.bias"] = zeros((d,), dtype)
    for modality in ENCODED:
        prefix = f"fusion.enc.{modality}"
        state[f"{prefix}.pos"] = randn(rng, (cfg.max_len, d), 0.02, dtype)
        state.update(init_attention(rng, f"{prefix}.attn", d, dtype))
        for norm in ("ln1", "ln2"):
            state[f"{prefix}.{norm}.gamma"] = ones((d,), dtype)
            state[f"{prefix}.{norm}.beta"] = zeros((d,), dtype)
        state[f"{prefix}.ffn.w1"] = randn(rng, (d, cfg.hidden), 1.0 / np.sqrt(d), dtype)
        state[f"{prefix}.ffn.b1"] = zeros((cfg.hidden,), dtype)
        state[f"{prefix}.ffn.w2"] = randn(rng, (cfg.hidden, d), 1.0 / np.sqrt(cfg.hidden), dtype)
        state[f"{prefix}.ffn.b2"] = zeros((d,), dtype)
        state[f"fusion.null.{modality}"] = randn(rng, (1, widths[modality]), 0.1, dtype)
    state["fusion.weights"] = zeros((len(MODALITIES),), dtype)
    state["fusion.head.w1"] = randn(rng, (len(MODALITIES) * d, cfg.hidden), 1.0 / np.sqrt(len(MODALITIES) * d), dtype)
    state["fusion.head.b1"] = zeros((cfg.hidden,), dtype)
    state["fusion.head.w2"] = randn(rng, (cfg.hidden, EMOTIONS), 1.0 / np.sqrt(cfg.hidden), dtype)
    state["fusion.head.b2"] = zeros((EMOTIONS,), dtype)
    return state


def encode_sequence(x, params: Mapping[str, Any], prefix: str, cfg: FusionConfig, ops: Ops = EAGER):
    """Post-norm encoder layer: h = x + pos; h = LN1(h + MHA(h)); LN2(h + FFN(h))."""
    n, width = x.shape
    if width != cfg.d_f:
        raise DimensionMismatch(f"sequence width {width} does not match d_f={cfg.d_f}")
    positions = [min(i, cfg.max_len - 1) for i in range(n)]
    h = ops.add(x, ops.gather_rows(params[f"{prefix}.pos"], positions))
    mixed, _ = multi_head_attention(h, AttentionParams.from_state(params, f"{prefix}.attn"), cfg.heads, ops)
    h = ops.layer_norm(ops.add(h, mixed), LayerNormParams(params[f"{prefix}.ln1.gamma"], params[f"{prefix}.ln1.beta"]))
    h = ops.add(h, feed_forward(h, params, f"{prefix}.ffn", ops))
    return ops.layer_norm(h, LayerNormParams(params[f"{prefix}.ln2.gamma"], params[f"{prefix}.ln2.beta"]))


def modality_weights(params: Mapping[str, Any], ops: Ops = EAGER):
    return ops.softmax(params["fusion.weights"])


def fuse_and_predict(features: ModalityFeatures, cfg: FusionConfig, params: Mapping[str, Any], ops: Ops = EAGER):
    """Project, encode, mean-pool and weight each modality, then run the head.

    Returns six logits and six sigmoid probabilities.
    """
    sequences = {"visual": features.visual, "acoustic": features.acoustic, "text": features.textual}
    weights = modality_weights(params, ops)
    pooled = []
    for index, modality in enumerate(MODALITIES):
        x = sequences[modality]
        if x.shape[0] == 0:
            if modality not in ENCODED:
                raise DimensionMismatch("the textual sequence must hold at least one row")
            x = params[f"fusion.null.{modality}"]
        x = ops.add_bias(ops.matmul(x, params[f"fusion.proj.{modality}.weight"]),
                         params[f"fusion.proj.{modality}.bias"])
        if modality in ENCODED:
            x = encode_sequence(x, params, f"fusion.enc.{modality}", cfg, ops)
        pooled.append(ops.mul_scalar(ops.mean(x, axis=0), ops.select(weights, index)))
    fused = ops.reshape(ops.concat(pooled, axis=0), (1, len(MODALITIES) * cfg.d_f))
    hidden = ops.relu(ops.add_bias(ops.matmul(fused, params["fusion.head.w1"]), params["fusion.head.b1"]))
    logits = ops.reshape(ops.add_bias(ops.matmul(hidden, params["fusion.head.w2"]), params["fusion.head.b2"]),
                         (EMOTIONS,))
    return logits, ops.sigmoid(logits)


def scores_from_probs(probs: Tensor, label_set: str) -> EmotionScores:
    """Reported probabilities lie in [PROB_EPS, 1 - PROB_EPS]; a saturated f32 sigmoid rounds to 0 or 1."""
    clamped = np.clip(probs.array.astype(np.float64), PROB_EPS, 1.0 - PROB_EPS)
    return EmotionScores(tuple(float(p) for p in clamped), label_set)


def predict_labels(scores: EmotionScores, threshold: float = 0.5) -> tuple[int, ...]:
    """1 where prob ≥ threshold; the threshold is clamped to [0, 1]."""
    threshold = min(max(threshold, 0.0), 1.0)
    return tuple(int(p >= threshold) for p in scores.probs)
