class ExtractError(Exception):
    """Base class for extraction failures."""


class ManifestError(ExtractError):
    """Manifest file violates the TSV contract or its row invariants."""


class AudioError(ExtractError):
    """An audio file could not be decoded."""


class EncoderError(ExtractError):
    """A foundation-model encoder is unavailable or misbehaved."""


class DimMismatchError(ExtractError):
    """Encoder output width disagrees with the registry's expected size."""
