"""Exception types raised across the package."""


class QnlNetError(Exception):
    """Base class for all package errors."""

    kind = "error"


class ConfigurationError(QnlNetError, ValueError):
    kind = "config"


class ShapeError(QnlNetError, ValueError):
    kind = "shape"


class DomainError(QnlNetError, ValueError):
    kind = "domain"


class FormatError(QnlNetError, ValueError):
    """A data file does not follow its binary layout."""

    kind = "format"

    def __init__(self, message, path=None, offset=None):
        self.path = path
        self.offset = offset
        where = []
        if path is not None:
            where.append(f"file={path}")
        if offset is not None:
            where.append(f"offset={offset}")
        super().__init__(message + (f" ({', '.join(where)})" if where else ""))


class FitError(QnlNetError, ValueError):
    kind = "fit"


class CheckpointError(QnlNetError, ValueError):
    """Checkpoint is unreadable or does not fit the requested configuration."""

    kind = "checkpoint"


class UsageError(QnlNetError, RuntimeError):
    kind = "usage"


class TrainingError(QnlNetError, RuntimeError):
    kind = "training"

    def __init__(self, message, sample_index=None):
        self.sample_index = sample_index
        if sample_index is not None:
            message = f"{message} (sample_index={sample_index})"
        super().__init__(message)
