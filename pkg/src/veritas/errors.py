"""Exception hierarchy shared by every veritas module."""

from __future__ import annotations


class VeritasError(Exception):
    """Base class for all engine errors."""


class SchemaError(VeritasError):
    """A document does not follow its declared schema."""


class ValidationError(VeritasError):
    """A value violates a domain invariant."""

    def __init__(self, message: str, *, test_id: str | None = None, field: str | None = None):
        self.test_id = test_id
        self.field = field
        where = ", ".join(p for p in (test_id and f"test {test_id}", field and f"field {field}") if p)
        super().__init__(f"{message} ({where})" if where else message)


class DuplicateIdError(ValidationError):
    pass


class UnitMismatch(VeritasError):
    pass


class NonFiniteValue(VeritasError):
    pass


class UnknownTestId(VeritasError):
    pass


class NoResult(VeritasError):
    pass


class IllegalTransition(VeritasError):
    pass


class UnauthorizedRole(VeritasError):
    pass


class StaleSession(VeritasError):
    pass


class CorruptState(VeritasError):
    pass


class VersionMismatch(VeritasError):
    pass


class MalformedRecord(VeritasError):
    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")
