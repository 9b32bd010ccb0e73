"""Exception hierarchy shared across the toolkit.

The CLI maps these onto distinct exit codes, so keep the split between
configuration, data, and IO problems intact when raising.
"""


class SceneHashError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(SceneHashError):
    """Invalid configuration value or inconsistent parameter combination."""


class ImageError(SceneHashError):
    """Undecodable image, empty crop, or otherwise unusable pixel data."""


class DataError(SceneHashError):
    """Bad manifest, missing labels, or an otherwise unusable dataset."""


class ModelIOError(SceneHashError):
    """Problem reading or writing a serialized model file."""


class BadMagicError(ModelIOError):
    """File does not start with the expected magic bytes."""


class UnsupportedVersionError(ModelIOError):
    """File declares a format version this build cannot read."""


class TruncatedModelError(ModelIOError):
    """File ends before the declared sections or checksum."""


class ChecksumError(ModelIOError):
    """Stored CRC32 does not match the file contents."""
