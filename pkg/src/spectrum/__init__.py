"""Hierarchical spectrum attention tower."""

from src.spectrum.tower import (AttentionMaps, PatchGrid, SpectrumTowerConfig, aggregate, forward_tower,
                                init_tower, partition_patches, transformer_layer)

__all__ = ['AttentionMaps', 'PatchGrid', 'SpectrumTowerConfig', 'aggregate', 'forward_tower', 'init_tower',
           'partition_patches', 'transformer_layer']
