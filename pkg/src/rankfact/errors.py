"""Exception types shared across the package."""


class PanelParseError(ValueError):
    """A row of an input file could not be parsed (message carries the row number)."""


class PanelValidationError(ValueError):
    """Parsed data violates a panel invariant (duplicate rows, non-positive caps, ...)."""


class CoverageError(RuntimeError):
    """An operation needs data (stocks, ranks, dividends) that the panel does not cover."""


class CapabilityError(RuntimeError):
    """A generating function lacks the derivative needed by the requested operation."""
