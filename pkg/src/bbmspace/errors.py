"""Exception types raised across the toolkit."""


class BBMError(Exception):
    """Base class for every error raised by :mod:`bbmspace`."""


class DomainError(BBMError, ValueError):
    """A parameter or geometric object lies outside its admissible range."""


class ShapeError(BBMError, ValueError):
    """Grid functions with incompatible dimension or resolution were combined."""


class FamilyError(BBMError, ValueError):
    """A cube family is not a valid (disjoint, capped, in-domain) collection."""


class CapacityError(BBMError, RuntimeError):
    """An exhaustive routine was asked to handle more candidates than allowed."""


class ArgumentError(BBMError, ValueError):
    """Arguments are individually valid but inconsistent with each other."""
