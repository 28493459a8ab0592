"""Exception hierarchy shared by every oglab module.

Each class carries the process exit code the command-line front end maps it to.
"""


class OglabError(Exception):
    exit_code = 1


class ConfigurationError(OglabError):
    """Shape mismatch, unknown id, incompatible algorithm/environment pairing."""

    exit_code = 2


class ProtocolError(OglabError):
    """A caller broke an interaction contract (illegal action, missing checkpoint)."""

    exit_code = 2


class DataError(OglabError):
    """Dataset contents violate an invariant the algorithms rely on."""

    exit_code = 3


class VaultError(DataError):
    """Unreadable or inconsistent vault file.

    ``code`` is one of ``bad_magic``, ``unsupported_version``, ``truncated_body``,
    ``count_mismatch``, ``invalid_header`` or ``invariant_violation``.
    """

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


class ParseError(DataError):
    def __init__(self, message: str, row: int | None = None, column: int | None = None):
        where = ""
        if row is not None:
            where = f" (row {row}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + where)
        self.row = row
        self.column = column


class NumericError(OglabError):
    """Non-finite loss or gradient. ``step`` is the offending time/update index when known."""

    exit_code = 4

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step
