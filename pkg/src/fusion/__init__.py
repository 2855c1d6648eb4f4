"""Weighted multimodal fusion and emotion prediction."""

from src.fusion.head import (EMOTIONS, LABEL_SETS, EmotionScores, FusionConfig, ModalityFeatures,
                             encode_sequence, fuse_and_predict, predict_labels)

__all__ = ['EMOTIONS', 'LABEL_SETS', 'EmotionScores', 'FusionConfig', 'ModalityFeatures', 'encode_sequence',
           'fuse_and_predict', 'predict_labels']
