"""Exception types shared across the package."""


class TmsimError(Exception):
    """Base class for all package errors."""


class SingularMetric(TmsimError):
    """Metric determinant too close to zero to invert."""

    def __init__(self, det, cell=None):
        self.det = det
        self.cell = cell
        where = f" at cell {cell}" if cell is not None else ""
        super().__init__(f"metric determinant {det!r} below threshold{where}")


class SpacelikeDegeneration(TmsimError):
    """The graph stopped being timelike (det h >= -1e-14) somewhere."""

    def __init__(self, det, cell=None):
        self.det = det
        self.cell = cell
        where = f" at cell {cell}" if cell is not None else ""
        super().__init__(f"graph lost timelike character (det h = {det!r}){where}")


class CoercivityLost(TmsimError):
    """The hyperbolicity margin dropped to zero or below at some cell."""

    def __init__(self, cell, margin, t=None):
        self.cell = cell
        self.margin = margin
        self.t = t
        at = f" at t={t}" if t is not None else ""
        super().__init__(f"coercivity margin {margin!r} <= 0 at cell {cell}{at}")


class NonFinite(TmsimError):
    """A field sample is NaN or infinite."""


class SingularBlock(TmsimError):
    """The time-time coefficient block failed to invert (internal error:
    unreachable while the coercivity condition holds)."""


class UnresolvableProfile(TmsimError):
    """Data profile too narrow for the grid spacing."""


class IncompatibleWithPeriodicity(TmsimError):
    """Requested data cannot be represented on a periodic box."""


class DegenerateSeries(TmsimError):
    """A decay fit was requested on a series with non-positive samples."""


class IncompleteSeries(TmsimError):
    """A time series has cadence gaps too large for quadrature."""


class ParseError(TmsimError):
    """Config text could not be parsed."""

    def __init__(self, line_no, message):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class ValidationError(TmsimError):
    """A config field failed validation."""

    def __init__(self, field, reason):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")
