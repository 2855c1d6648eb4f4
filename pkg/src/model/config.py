"""Model configuration documents and built-in presets."""

import json
import os
from dataclasses import asdict, dataclass, field, fields

from src.audio.mel import MelConfig
from src.errors import ConfigError, FV2ESError
from src.fusion.head import FusionConfig
from src.spectrum.tower import SpectrumTowerConfig
from src.tensor.tensor import DType
from src.text.encoder import TextEncoderConfig
from src.vision.repvgg import LayerSpec, VisionNetConfig

DTYPES = {"f32": DType.F32, "f64": DType.F64}


@dataclass(frozen=True)
class ModelConfig:
    audio: MelConfig = field(default_factory=MelConfig)
    tower: SpectrumTowerConfig = field(default_factory=SpectrumTowerConfig)
    vision: VisionNetConfig = field(default_factory=VisionNetConfig)
    text: TextEncoderConfig = field(default_factory=TextEncoderConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    audio_window_seconds: float = 1.0
    dtype: str = "f32"

    def __post_init__(self):
        if self.tower.side != self.audio.side:
            raise ConfigError(f"tower side {self.tower.side} differs from spectrum side {self.audio.side}")
        if self.audio_window_seconds <= 0:
            raise ConfigError("audio_window_seconds must be positive")
        if self.dtype not in DTYPES:
            raise ConfigError(f"dtype must be one of {sorted(DTYPES)}, got {self.dtype!r}")
        if self.audio.n_mels < 2 or self.audio.n_fft & (self.audio.n_fft - 1):
            raise ConfigError("n_mels must be at least 2 and n_fft a power of two")

    @property
    def tensor_dtype(self) -> DType:
        return DTYPES[self.dtype]

    def with_dtype(self, dtype: str) -> "ModelConfig":
        return ModelConfig(self.audio, self.tower, self.vision, self.text, self.fusion,
                           self.audio_window_seconds, dtype)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["vision"]["layers"] = [[l.c_in, l.c_out, l.stride] for l in self.vision.layers]
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        if not isinstance(data, dict):
            raise ConfigError("model config must be a JSON object")
        _reject_unknown(data, cls, "config")
        sections = {"audio": MelConfig, "tower": SpectrumTowerConfig, "text": TextEncoderConfig,
                    "fusion": FusionConfig}
        kwargs = {}
        try:
            for name, section in sections.items():
                if name in data:
                    _reject_unknown(data[name], section, name)
                    kwargs[name] = section(**data[name])
            if "vision" in data:
                vision = dict(data["vision"])
                _reject_unknown(vision, VisionNetConfig, "vision")
                if "layers" in vision:
                    vision["layers"] = tuple(LayerSpec(*layer) for layer in vision["layers"])
                kwargs["vision"] = VisionNetConfig(**vision)
            for name in ("audio_window_seconds", "dtype"):
                if name in data:
                    kwargs[name] = data[name]
            return cls(**kwargs)
        except FV2ESError as error:
            raise ConfigError(str(error)) from error
        except TypeError as error:
            raise ConfigError(f"malformed config: {error}") from error


def _reject_unknown(section, cls, label: str):
    if not isinstance(section, dict):
        raise ConfigError(f"{label} must be a JSON object")
    unknown = set(section) - {f.name for f in fields(cls)}
    if unknown:
        raise ConfigError(f"unknown {label} keys: {sorted(unknown)}")


def _chain(channels: list[int], strides: list[int]) -> tuple[LayerSpec, ...]:
    return tuple(LayerSpec(c_in, c_out, stride) for c_in, c_out, stride in zip(channels, channels[1:], strides))


PRESETS = {
    "default": ModelConfig(),
    "toy": ModelConfig(
        audio=MelConfig(sample_rate=8000, n_fft=256, hop=64, n_mels=16, side=16),
        tower=SpectrumTowerConfig(side=16, d=16, heads=2, sub=2),
        vision=VisionNetConfig(_chain([3, 4, 8, 8, 8, 8, 16], [2, 2, 1, 2, 1, 2]), side=16),
        text=TextEncoderConfig(vocab_size=256, d_t=16, layers=1, heads=2, max_len=64),
        fusion=FusionConfig(d_f=16, hidden=32, heads=2, max_len=64),
        audio_window_seconds=1.0,
    ),
    "tiny": ModelConfig(
        audio=MelConfig(sample_rate=8000, n_fft=64, hop=32, n_mels=8, side=8),
        tower=SpectrumTowerConfig(side=8, d=4, heads=1, sub=2),
        vision=VisionNetConfig(_chain([3, 2, 2, 2, 2, 2, 2], [2, 1, 2, 1, 1, 1]), side=8),
        text=TextEncoderConfig(vocab_size=32, d_t=4, layers=1, heads=1, max_len=16),
        fusion=FusionConfig(d_f=4, hidden=8, heads=1, max_len=16),
        audio_window_seconds=0.25,
    ),
}


def load_config(name_or_path: str) -> ModelConfig:
    """A preset name or the path of a JSON config document."""
    if name_or_path in PRESETS:
        return PRESETS[name_or_path]
    if not os.path.isfile(name_or_path):
        raise ConfigError(f"{name_or_path!r} is neither a preset {sorted(PRESETS)} nor a config file")
    try:
        with open(name_or_path, encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as error:
        raise ConfigError(f"{name_or_path}: {error}") from error
    return ModelConfig.from_dict(data)
