"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where the operation is defined."""


class InapplicableError(ValueError):
    """A bound's applicability condition fails, so no certificate can be issued."""


class NumericalFailure(ArithmeticError):
    """A computation could not reach its accuracy contract."""
