"""Exception types shared across the toolkit."""


class CilinError(Exception):
    """Base class for all toolkit errors."""


class EmbeddingLoadError(CilinError):
    """Raised when a word-vector stream cannot be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class OOVError(CilinError, KeyError):
    """Raised on lookup of a token absent from an embedding table."""

    def __init__(self, token):
        super().__init__(f"out-of-vocabulary token: {token!r}")
        self.token = token


class UnencodableError(CilinError):
    """Raised when no token of an input survives vocabulary filtering."""

    def __init__(self, tokens):
        super().__init__(f"no in-vocabulary tokens in {list(tokens)!r}")
        self.tokens = list(tokens)


class UndefinedSimilarityError(CilinError):
    """Raised when cosine similarity is requested for a zero-norm vector."""


class TrainingError(CilinError):
    """Raised when a model cannot be trained from the given data."""


class ParameterError(CilinError):
    """Raised on invalid hyperparameters (e.g. more clusters than points)."""


class IntegrityError(CilinError):
    """Raised when a snapshot violates referential or acyclicity checks."""


class SnapshotLoadError(CilinError):
    """Raised when a persisted snapshot cannot be read back."""


class ParseError(CilinError):
    """Raised on malformed input records."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(CilinError):
    """Raised when a pipeline or server configuration is invalid."""
