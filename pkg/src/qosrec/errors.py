"""Exception hierarchy shared across the package."""


class QosrecError(Exception):
    """Base class for all errors raised by qosrec."""


class ParseError(QosrecError):
    """A dataset file is malformed; message names the file and line."""


class IntegrityError(QosrecError):
    """Parsed data violates a structural invariant (duplicate IDs, bad checksum)."""


class FeatureFormatError(QosrecError):
    """A feature file is not valid QFV1 or carries inconsistent contents."""


class EndpointError(QosrecError):
    """The embedding endpoint failed or returned an unusable response."""


class TrainingError(QosrecError):
    """Training cannot proceed (empty train set, non-finite loss/gradients)."""


class CheckpointError(QosrecError):
    """A checkpoint blob is unreadable or fails its checksum."""


class ConfigError(QosrecError):
    """A run configuration is missing keys or carries invalid values."""
