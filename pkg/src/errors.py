"""
Exceptions raised by the measure mining modules.

Every error is a ValueError so callers that only know about bad input keep working.
"""
from typing import Optional


class MeasureError(ValueError):
    """Root of all domain errors."""


class SumNotOne(MeasureError):
    pass


class NegativeWeight(MeasureError):
    pass


class ForeignAtoms(MeasureError):
    pass


class NullCarrier(MeasureError):
    """Raised when a density is requested on a carrier of measure zero."""


class OverlappingCells(MeasureError):
    """Raised when cells that must be pairwise disjoint share an atom, or a cell is empty."""


class NotRefinement(MeasureError):
    pass


class SpaceMismatch(MeasureError):
    pass


class BoundViolation(MeasureError):
    """Raised when a declared L1 bound is smaller than an actual norm."""


class PreconditionViolated(MeasureError):
    pass


class FluctuationCertificateMissing(MeasureError):
    pass


class CertificateMissing(MeasureError):
    """Raised when a construction's output fails its own oracle."""


class SearchExhausted(MeasureError):
    pass


class UnknownName(MeasureError):
    pass


class IndexOutOfRange(MeasureError):
    pass


class ScenarioError(MeasureError):
    """Base for scenario problems; carries where in the document it happened."""

    def __init__(self, message: str, location: Optional[str] = None):
        self.reason = message
        self.location = location
        if location:
            message = f"{message} (at {location})"
        super().__init__(message)


class ParseError(ScenarioError):
    pass


class ValidationError(ScenarioError):
    pass
