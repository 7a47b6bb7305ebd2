"""Exception hierarchy shared across the pipeline.

DataError maps to exit code 1, ConfigError to exit code 2.
"""


class TrialMatchError(Exception):
    """Base class for all pipeline errors."""


class DataError(TrialMatchError):
    """Malformed or inconsistent input data (corrupt XML, bad run line, ...)."""


class ConfigError(TrialMatchError):
    """Invalid configuration: missing files, unknown model names, stale artifacts."""


class TrialParseError(DataError):
    """XML document could not be parsed.

    Carries the byte offset of the failure within the source file when known.
    """

    def __init__(self, message: str, source: str = "", byte_offset: int | None = None):
        self.source = source
        self.byte_offset = byte_offset
        where = f" in {source}" if source else ""
        at = f" at byte {byte_offset}" if byte_offset is not None else ""
        super().__init__(f"{message}{where}{at}")
