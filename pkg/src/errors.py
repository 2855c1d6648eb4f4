"""Exception types shared by every FV2ES module.

Each error carries the process exit code the command line reports for it:
2 for user-input problems, 3 for malformed data files, 4 for internal
invariant violations.
"""

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_FORMAT = 3
EXIT_INVARIANT = 4


class FV2ESError(Exception):
    """Base class for all FV2ES errors."""

    exit_code = EXIT_INVARIANT


# Invariant violations (exit 4)

class DimensionMismatch(FV2ESError, ValueError):
    """Tensor shapes or dtypes do not agree with an operation's contract."""


class NonFiniteError(FV2ESError, ArithmeticError):
    """A NaN or infinity escaped into a tensor."""


class NotScalarLoss(FV2ESError, ValueError):
    """backward() was called on a node holding more than one value."""


class BadShape(FV2ESError, ValueError):
    """A spectrum or tower configuration violates the patch geometry."""


class BadLayer(FV2ESError, ValueError):
    """Aggregation was requested beyond the top pyramid layer."""


class DegenerateClass(FV2ESError, ValueError):
    """Weighted accuracy is undefined because a class has no positives or no negatives."""


class EmptyList(FV2ESError, ValueError):
    """An aggregation received no items."""


class AttentionExportError(FV2ESError, OSError):
    """Attention maps could not be written."""


# User-input errors (exit 2)

class InputError(FV2ESError):
    """A path or argument supplied by the user is unusable."""

    exit_code = EXIT_INPUT


class ConfigError(InputError, ValueError):
    """A model configuration is malformed or violates an invariant."""


class BadSide(InputError, ValueError):
    """The square spectrum side is not divisible by 4."""


class EmptyAssets(InputError, ValueError):
    """No modality carries any data."""


class AlreadyFused(InputError):
    """Reparameterization was requested on a fused checkpoint."""


class ArchitectureMismatch(InputError):
    """Two checkpoints that should describe the same network do not."""


# Data-format errors (exit 3)

class FormatError(FV2ESError):
    """An input file does not follow its documented format."""

    exit_code = EXIT_FORMAT


class TensorFormatError(FormatError, ValueError):
    """An FVT1 tensor file is corrupt."""


class CheckpointError(FormatError):
    """A checkpoint manifest or one of its tensors is inconsistent."""


class UnsupportedCodec(FormatError):
    """A WAV file is not 16-bit PCM."""


class UnsupportedSampleRate(FormatError):
    """A WAV sample rate is not an integer multiple of the configured rate."""


class TooShort(FormatError, ValueError):
    """Audio is shorter than one analysis frame."""


class LengthMismatch(FormatError, ValueError):
    """Predictions and labels describe different numbers of samples."""


class TranscriptError(FormatError, ValueError):
    """A transcript line is not a valid utterance record."""


class FrameError(FormatError, ValueError):
    """A frame image is unreadable or its name carries no timestamp."""


class ReportError(FormatError, ValueError):
    """A predictions or labels file does not have the expected structure."""
