"""Exception hierarchy.

Every error carries a short ``code`` so the CLI can print a single
machine-parsable line before the human-readable detail.
"""


class ConvoyError(Exception):
    code = "E_CONVOY"


class InvalidInputError(ConvoyError, ValueError):
    code = "E_INVALID_INPUT"


class DegenerateGeometryError(ConvoyError, ValueError):
    code = "E_DEGENERATE_GEOMETRY"


class MissingEgoError(ConvoyError, LookupError):
    code = "E_MISSING_EGO"


class EncodeError(ConvoyError, ValueError):
    code = "E_ENCODE"


class MalformedFrameError(ConvoyError, ValueError):
    code = "E_MALFORMED_FRAME"


class ForeignFrameError(ConvoyError, ValueError):
    """Datagram without our magic; transports drop these silently."""

    code = "E_FOREIGN_FRAME"


class TransportError(ConvoyError, OSError):
    code = "E_TRANSPORT"


class ConfigError(ConvoyError, ValueError):
    code = "E_CONFIG"

    def __init__(self, message, field=None, line=None, source=None):
        self.field = field
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where = f"{source}:"
        if line is not None:
            where += f"{line}:"
        if where:
            message = f"{where} {message}"
        super().__init__(message)


class MalformedTraceError(ConvoyError, ValueError):
    code = "E_MALFORMED_TRACE"


class EmptyInputError(ConvoyError, ValueError):
    code = "E_EMPTY_INPUT"


class IncompleteSweepError(ConvoyError, ValueError):
    code = "E_INCOMPLETE_SWEEP"
