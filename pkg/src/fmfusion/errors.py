"""Exception taxonomy shared by every subsystem.

The CLI maps these onto stable exit codes: DataError -> 3,
ShapeError/ConfigError -> 4, NumericError -> 5.
"""


class FmFusionError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(FmFusionError):
    """Tensor dimensions violate an operation's contract."""


class ConfigError(FmFusionError):
    """Invalid configuration value (head counts, probabilities, ...)."""


class NumericError(FmFusionError):
    """Non-finite values or a failed numerical check."""


class DataError(FmFusionError):
    """Base class for dataset and file-format problems."""


class ValidationError(DataError):
    """A dataset invariant does not hold (duplicate ids, bad label, ...)."""


class MagicError(DataError):
    """File does not start with the expected magic bytes."""


class VersionError(DataError):
    """File carries an unsupported format version."""


class TruncatedFileError(DataError):
    """File ended before the payload it declares; message names the byte offset."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class NonFiniteDataError(DataError):
    """A stored vector contains NaN or Inf."""


class ConsistencyError(DataError):
    """Two sources disagree about a shared utterance (label or split)."""


class PairingError(DataError):
    """Strict pairing failed because the id sets differ."""


class MetricError(DataError):
    """A metric is undefined for the given inputs (e.g. single-class EER)."""
