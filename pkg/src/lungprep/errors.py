"""Exception types shared across the toolkit.

The CLI maps these onto process exit codes: InputDataError -> 3,
UsageError -> 2, anything else unexpected -> 4.
"""


class LungprepError(Exception):
    """Base class for all toolkit errors."""


class UsageError(LungprepError):
    """Bad command-line invocation or argument combination."""


class InputDataError(LungprepError):
    """Unreadable, malformed, or contract-violating input data."""


class FormatError(InputDataError):
    """A file does not match its declared on-disk format."""


class SchemaMismatchError(InputDataError):
    """Feature vectors or models with incompatible schemas were mixed."""


class NoLungStructureError(LungprepError):
    """The automated crop found no edge structure to crop to."""
