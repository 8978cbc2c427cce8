"""Exception types shared across the package.

The CLI maps these onto its exit codes: :class:`FormatError` and
:class:`DomainError` are data errors (2), :class:`ContractViolation` is 3.
"""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class FormatError(DomainError):
    """A file could not be parsed."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset


class ContractViolation(DomainError):
    """An object breaks a structural invariant, e.g. a non-monotone filter."""
