"""Exception hierarchy shared across the package."""


class SpatialGrowthError(Exception):
    """Base class for all package errors."""


class InvalidInputError(SpatialGrowthError, ValueError):
    pass


class SingularDistanceError(InvalidInputError):
    """Two distinct units sit at zero distance under a power-law kernel."""

    def __init__(self, i, j):
        self.pair = (int(i), int(j))
        super().__init__(f"zero distance between units {i} and {j}; inverse-square kernel undefined")


class IsolatedUnitError(InvalidInputError):
    def __init__(self, row):
        self.row = int(row)
        super().__init__(f"row {row} has no positive off-diagonal weight (isolated unit)")


class DimensionError(InvalidInputError):
    pass


class DomainError(SpatialGrowthError, ValueError):
    """Parameter outside its admissible region."""


class CollinearityError(SpatialGrowthError, ValueError):
    def __init__(self, message, columns=()):
        self.columns = tuple(columns)
        super().__init__(message)


class SchemaError(SpatialGrowthError, KeyError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"missing required column {column!r}")

    def __str__(self):
        return self.args[0]


class ParseError(SpatialGrowthError, ValueError):
    def __init__(self, row, column, value):
        self.row, self.column, self.value = row, column, value
        super().__init__(f"non-numeric value {value!r} at row {row}, column {column!r}")


class DegenerateGrowthError(SpatialGrowthError, ValueError):
    def __init__(self, country, value):
        self.country = country
        super().__init__(f"n + g + delta = {value:.6g} <= 0 for country {country!r}")


class SingularInformationError(SpatialGrowthError, ValueError):
    pass


class ConditioningError(SpatialGrowthError, ValueError):
    def __init__(self, message, eigenvalue=None):
        self.eigenvalue = eigenvalue
        super().__init__(message)


class NotNestedError(SpatialGrowthError, ValueError):
    pass


class ConfigError(SpatialGrowthError, ValueError):
    pass


class ReplicationFailureError(SpatialGrowthError, RuntimeError):
    pass


class UnidentifiedError(SpatialGrowthError, ValueError):
    """Structural parameter not identified; carries what can still be recovered."""

    def __init__(self, message, **recoverable):
        self.recoverable = recoverable
        super().__init__(message)
