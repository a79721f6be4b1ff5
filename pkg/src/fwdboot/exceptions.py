class FwdbootError(Exception):
    """Base class for errors raised by this package."""


class DataError(FwdbootError, ValueError):
    """The input series cannot be used."""


class EmptySample(DataError):
    pass


class DegenerateSample(DataError):
    """Predictors have zero spread, so no bandwidth can be selected."""


class ParseError(DataError):
    def __init__(self, row, message=""):
        self.row = row
        super().__init__(f"row {row}: {message}" if message else f"row {row}")


class EmptyFile(DataError):
    pass


class NumericalError(FwdbootError, ArithmeticError):
    pass


class ZeroDenominator(NumericalError):
    """Every kernel weight vanishes at the evaluation point."""


class EmptyDistribution(FwdbootError, ValueError):
    pass


class LengthMismatch(FwdbootError, ValueError):
    pass
