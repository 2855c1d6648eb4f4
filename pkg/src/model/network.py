"""The end-to-end video-to-emotion model."""

from typing import Any, Mapping

import numpy as np

from src.errors import AlreadyFused
from src.fusion.head import EMOTIONS, EmotionScores, ModalityFeatures, fuse_and_predict, init_fusion, \
    scores_from_probs
from src.model.config import ModelConfig
from src.model.inputs import SegmentInputs
from src.spectrum.tower import AttentionMaps, forward_tower, init_tower
from src.tensor.backend import EAGER, Ops
from src.tensor.tensor import Tensor, zeros
from src.text.encoder import HashedTextEncoder
from src.vision.repvgg import blocks_from_state, frame_features, fuse_network, fused_state, init_vision, is_buffer

MODALITY_PREFIXES = {"audio": "audio.", "visual": "vision.", "text": "text.", "fusion": "fusion."}


class V2EMModel:
    """Configuration, parameters and BN buffers of one model.

    mode is "train" for multi-branch visual blocks or "fused" after
    reparameterization. The same forward runs eagerly or on a graph.
    """

    def __init__(self, config: ModelConfig, state: Mapping[str, Tensor], mode: str = "train"):
        self.config = config
        self.state = dict(state)
        self.mode = mode
        self.text_encoder = HashedTextEncoder(config.text)
        self._blocks = blocks_from_state(self.state, config.vision, mode)

    @classmethod
    def initialize(cls, config: ModelConfig, seed: int = 0, random_stats: bool = False) -> "V2EMModel":
        rng = np.random.default_rng(seed)
        dtype = config.tensor_dtype
        state = init_tower(rng, config.tower, dtype)
        state.update(init_vision(rng, config.vision, dtype, random_stats))
        encoder = HashedTextEncoder(config.text)
        state.update(encoder.init_params(rng, dtype))
        widths = {"visual": config.vision.feature_dim, "acoustic": config.tower.d, "text": encoder.output_dim}
        state.update(init_fusion(rng, config.fusion, widths, dtype))
        return cls(config, state, "train")

    def trainable(self) -> frozenset[str]:
        return frozenset(name for name in self.state if not is_buffer(name))

    def with_state(self, state: Mapping[str, Tensor]) -> "V2EMModel":
        return V2EMModel(self.config, state, self.mode)

    def features(self, inputs: SegmentInputs, params: Mapping[str, Any], ops: Ops = EAGER) -> ModalityFeatures:
        cfg = self.config
        dtype = cfg.tensor_dtype
        if inputs.spectra:
            acoustic = ops.stack([forward_tower(s, cfg.tower, params, ops)[0] for s in inputs.spectra])
        else:
            acoustic = ops.constant(zeros((0, cfg.tower.d), dtype))
        blocks = self._blocks if params is self.state else blocks_from_state(params, cfg.vision, self.mode)
        visual = frame_features(list(inputs.frames), blocks, ops, dtype)
        textual = self.text_encoder.encode(inputs.tokens, params, ops)
        return ModalityFeatures(visual, acoustic, textual)

    def segment_logits(self, inputs: SegmentInputs, params: Mapping[str, Any] | None = None, ops: Ops = EAGER):
        """Six logits and six probabilities for one segment."""
        params = self.state if params is None else params
        inputs = inputs.astype(self.config.tensor_dtype)
        return fuse_and_predict(self.features(inputs, params, ops), self.config.fusion, params, ops)

    def predict(self, inputs: SegmentInputs) -> EmotionScores:
        _, probs = self.segment_logits(inputs)
        return scores_from_probs(probs, self.config.fusion.label_set)

    def attention_maps(self, spectrum: Tensor) -> AttentionMaps:
        _, maps = forward_tower(spectrum.astype(self.config.tensor_dtype), self.config.tower, self.state)
        return maps

    def fused(self) -> "V2EMModel":
        """Single-branch copy with every visual block reparameterized."""
        if self.mode == "fused":
            raise AlreadyFused("model is already reparameterized")
        state = {name: tensor for name, tensor in self.state.items() if not name.startswith("vision.")}
        state.update(fused_state(fuse_network(self._blocks)))
        return V2EMModel(self.config, state, "fused")

    def parameter_counts(self) -> dict[str, int]:
        """Scalar count per modality, BN running statistics included."""
        counts = {}
        for modality, prefix in MODALITY_PREFIXES.items():
            counts[modality] = sum(t.size for name, t in self.state.items() if name.startswith(prefix))
        counts["total"] = sum(counts.values())
        return counts

    @property
    def labels(self) -> tuple[str, ...]:
        return self.config.fusion.labels

    @property
    def emotions(self) -> int:
        return EMOTIONS
