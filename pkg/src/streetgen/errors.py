"""Exception hierarchy shared by all streetgen modules."""


class StreetGenError(Exception):
    """Base class for all streetgen errors."""


class InvalidParameter(StreetGenError, ValueError):
    pass


class DegenerateInput(StreetGenError, ValueError):
    pass


class EmptyResult(StreetGenError):
    pass


class InvalidGeometry(StreetGenError, ValueError):
    pass


class NoCircle(StreetGenError):
    """Three points are (nearly) collinear."""


class SingularSpeed(StreetGenError, ValueError):
    """Speed sits on the pole of the radius formula."""


class InternalInconsistency(StreetGenError):
    pass


class NotFound(StreetGenError, KeyError):
    pass


class InvalidObject(StreetGenError, ValueError):
    pass


class CrossingOutOfSurface(StreetGenError):
    pass


class SettingsError(StreetGenError, ValueError):
    pass


class NetworkParseError(StreetGenError, ValueError):
    pass


class ExportError(StreetGenError):
    pass
