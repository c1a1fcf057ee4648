"""Exception hierarchy shared by all modules."""


class MFuncError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(MFuncError, ValueError):
    """An argument or configuration violates a documented precondition."""


class DomainError(ValidationError):
    """A value lies outside the domain of an inverse map.

    ``endpoint`` is ``"lo"`` or ``"hi"`` and names the violated end.
    """

    def __init__(self, message, endpoint=None):
        super().__init__(message)
        self.endpoint = endpoint


class NumericalError(MFuncError):
    """A numerical routine could not meet its contract."""


class ToleranceNotMet(NumericalError):
    """Requested accuracy is out of reach within the work budget.

    Carries the best-effort ``value`` and the achieved error bound ``err``.
    """

    def __init__(self, message, value=None, err=None):
        super().__init__(message)
        self.value = value
        self.err = err


class NonDecayingTransform(NumericalError):
    """The transform has not decayed by the end of the integration range."""


class DataError(MFuncError):
    """Ingested data is malformed or incomplete."""


class ParseError(DataError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class MissingEigenvalues(DataError):
    def __init__(self, primes, what="eigenvalues"):
        primes = sorted(primes)
        shown = ", ".join(str(p) for p in primes[:20])
        if len(primes) > 20:
            shown += ", ..."
        super().__init__(f"missing {what} at p = {shown}")
        self.primes = primes
