"""Exception types. Each carries the process exit code the CLI maps it to."""

from __future__ import annotations


class MalleRandomError(Exception):
    exit_code = 1


class ValidationError(MalleRandomError, ValueError):
    """Malformed input: bad group spec, invalid weight, mismatched place sets."""

    exit_code = 2


class MissingDataError(MalleRandomError, LookupError):
    """A wild place was reached without a local table for it."""

    exit_code = 3


class CapExceededError(MalleRandomError):
    """A size bound (group order, frame size, enumeration cap) was exceeded."""

    exit_code = 4


class GroupTooLargeError(CapExceededError):
    pass


class OracleFailure(MalleRandomError, AssertionError):
    exit_code = 5
