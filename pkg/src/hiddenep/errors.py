"""Exception types shared across the package."""


class HiddenEPError(Exception):
    """Base class for all package errors."""


class DomainError(HiddenEPError, ValueError):
    """An argument lies outside the domain of the operation."""


class RegimeError(HiddenEPError, ValueError):
    """A closed form was requested on the wrong side of the exceptional point."""


class SizeError(HiddenEPError, ValueError):
    """A truncation or dimension is too small or too large."""


class ContractError(HiddenEPError, ValueError):
    """An input violates a structural contract (e.g. non-Hermitian operator)."""
