"""Exception hierarchy; everything raised on purpose derives from ExtractorError."""


class ExtractorError(Exception):
    pass


class ManifestError(ExtractorError):
    """Prompt manifest is malformed or inconsistent."""


class FormatError(ExtractorError):
    """A feature file is malformed."""


class ModelKindError(ExtractorError):
    """Model architecture is neither masked nor causal, or cannot be resolved."""


class PoolingError(ExtractorError):
    """Pooling strategy does not match the model architecture."""


class PromptTooLongError(ExtractorError):
    """A prompt exceeds the model context; truncation is never silent."""


class InferenceError(ExtractorError):
    """The model produced unusable output (non-finite values)."""
