"""Exception types shared across the package."""


class ScnLabError(Exception):
    """Base class for package errors."""


class ConfigError(ScnLabError):
    """Invalid architecture, dimension mismatch, or bad experiment config."""


class UsageError(ScnLabError):
    """API misuse, e.g. stepping an environment that is already done."""


class MissingArtifactError(ScnLabError):
    """A required checkpoint or curve file does not exist."""


class TrainingDiverged(ScnLabError):
    """An update produced a non-finite loss; training is aborted."""
