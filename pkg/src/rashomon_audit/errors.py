"""Exception types shared across the toolkit.

Everything that the CLI should report as a data problem (exit code 2)
derives from :class:`DataError`.
"""


class RashomonAuditError(Exception):
    """Base class for all toolkit errors."""


class DataError(RashomonAuditError):
    """Input data could not be used as requested."""


class MalformedCsv(DataError):
    pass


class NotBinaryTarget(DataError):
    pass


class EmptyAfterCleaning(DataError):
    pass


class ClassTooSmall(DataError):
    pass


class NameMismatch(DataError):
    pass


class MinorityTooSmall(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class SingleClass(DataError):
    """AUC (and therefore loss) is undefined when only one class is present."""


class DegenerateData(DataError):
    pass


class EmptySpace(RashomonAuditError):
    pass


class EmptyPool(RashomonAuditError):
    pass


class LengthMismatch(DataError):
    pass


class AllTied(DataError):
    """Kendall's tau-b denominator is zero."""


class DegenerateGroups(DataError):
    pass


class IncompleteDesign(DataError):
    pass


class UnknownMetric(RashomonAuditError):
    pass


class EmptyTable(RashomonAuditError):
    pass


class SchemaViolation(DataError):
    """Aggregated configuration errors; ``errors`` holds one message per violation."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {e}" for e in self.errors))
