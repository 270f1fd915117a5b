"""Exception hierarchy shared by every module."""


class DesignError(Exception):
    """Base class for errors raised by basisdesigns."""


class DomainError(DesignError, ValueError):
    """A parameter is outside the range where an operation is defined."""


class StructureError(DesignError, TypeError):
    """Operands belong to incompatible groups, fields or rings."""


class CapacityError(DesignError, ValueError):
    """An input exceeds the size supported by a brute-force routine."""


class NotInformationallyCompleteError(DesignError, ValueError):
    """The frame superoperator of a measurement is singular."""


class FormatError(DesignError, ValueError):
    """A serialized document could not be parsed."""
