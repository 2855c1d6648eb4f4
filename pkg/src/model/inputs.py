"""Preprocessed per-segment model inputs."""

from dataclasses import dataclass, field

from src.tensor.tensor import DType, Tensor
from src.text.tokenizer import TokenSequence


@dataclass(frozen=True)
class SegmentInputs:
    """Square spectra (one per audio window), 3×side×side frames and tokens of one segment."""

    spectra: tuple[Tensor, ...] = ()
    frames: tuple[Tensor, ...] = ()
    tokens: TokenSequence = field(default_factory=TokenSequence)

    def astype(self, dtype: DType) -> "SegmentInputs":
        return SegmentInputs(tuple(s.astype(dtype) for s in self.spectra),
                             tuple(f.astype(dtype) for f in self.frames), self.tokens)

    @property
    def is_empty(self) -> bool:
        return not self.spectra and not self.frames and not self.tokens.tokens
