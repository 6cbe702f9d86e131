"""Exception and warning types shared across the package."""


class RenewalMemlossError(Exception):
    """Base class for errors raised by this package."""


class DomainError(RenewalMemlossError, ValueError):
    """An argument lies outside the domain where a quantity is defined."""


class RangeError(RenewalMemlossError, IndexError):
    """A requested index exceeds the range of a computed sequence."""


class ResourceError(RenewalMemlossError, MemoryError):
    """A computation would exceed a configured size ceiling."""


class PreconditionError(RenewalMemlossError):
    """A structural precondition (e.g. monotonicity) does not hold."""


class NotFoundError(RenewalMemlossError, LookupError):
    """A searched-for object does not exist within the given limits."""


class MinorizationError(RenewalMemlossError):
    """The kernel fails to dominate epsilon * beta on the small set.

    Attributes
    ----------
    x, y : int
        Witnessing pair with ``kernel(x)(y) < epsilon * beta(y)``.
    """

    def __init__(self, x, y, kernel_value, floor):
        self.x = x
        self.y = y
        self.kernel_value = kernel_value
        self.floor = floor
        super().__init__(
            f"minorization fails at x={x}, y={y}: "
            f"kernel={kernel_value!r} < epsilon*beta={floor!r}"
        )


class ConfigError(RenewalMemlossError, ValueError):
    """Malformed configuration; carries the offending line or field."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class TruncationWarning(UserWarning):
    """Mass leaking out of a finite truncation exceeds the configured threshold."""


class DivergentNormWarning(UserWarning):
    """Partial sums of a weighted return-time moment fail to settle."""
