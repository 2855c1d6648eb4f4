"""Reparameterizable visual feature extractor."""

from src.vision.repvgg import (FusedBlockParams, LayerSpec, TrainBlockParams, VisionNetConfig,
                               block_forward_train, count_flops, count_params, fold_bn, frame_features,
                               fuse_block, fuse_network, identity_to_3x3, pad_1x1_to_3x3)

__all__ = ['FusedBlockParams', 'LayerSpec', 'TrainBlockParams', 'VisionNetConfig', 'block_forward_train',
           'count_flops', 'count_params', 'fold_bn', 'frame_features', 'fuse_block', 'fuse_network',
           'identity_to_3x3', 'pad_1x1_to_3x3']
