"""
Exception hierarchy for the forest engine.

Every error carries the process exit code the ``ranger`` management command
reports for it: 1 usage, 2 data, 3 forest file.
"""


class GroveError(Exception):
    """Base class for all engine errors"""

    exit_code = 2


class ConfigError(GroveError):
    """Invalid growth, sampling or command-line configuration"""

    exit_code = 1


class DataError(GroveError):
    """Malformed dataset contents, shape or schema"""

    exit_code = 2

    def __init__(self, message, index=None, line=None):
        super().__init__(message)
        self.index = index
        self.line = line


class ForestFileError(GroveError):
    """Stored forest cannot be read: bad magic, version, checksum or truncation"""

    exit_code = 3


class NoOobDataError(GroveError):
    """No sample is out-of-bag in any tree"""

    exit_code = 2


class ImportanceModeError(ConfigError):
    """Importance requested that was not accumulated during growth"""
