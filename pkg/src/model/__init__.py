"""Model assembly, configuration and checkpoints."""

from src.model.config import PRESETS, ModelConfig, load_config
from src.model.inputs import SegmentInputs
from src.model.network import V2EMModel

__all__ = ['PRESETS', 'ModelConfig', 'SegmentInputs', 'V2EMModel', 'load_config']
