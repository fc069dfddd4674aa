"""Exception taxonomy for the deftemp pipeline.

Grouped by surface: file/format errors, geometry/data contract errors, and
search-failure errors. The CLI maps these onto exit codes (config errors -> 3,
I/O errors -> 4, an empty search result -> 2).
"""


class DeftempError(Exception):
    """Base class for all library errors."""


# -- file / format -----------------------------------------------------------

class IoError(DeftempError):
    pass


class UnsupportedFormat(IoError):
    pass


class CorruptFile(IoError):
    pass


class ParseError(IoError):
    pass


# -- data contracts ----------------------------------------------------------

class ZeroDimension(DeftempError):
    pass


class TooFewContourPoints(DeftempError):
    pass


class TooFewControlPoints(DeftempError):
    pass


class ControlPointOutsideBbox(DeftempError):
    pass


class InvalidSpec(DeftempError):
    pass


class InvalidConfig(DeftempError):
    pass


class SigmaTooSmall(DeftempError):
    pass


class EmptyInput(DeftempError):
    pass


class EmptyTemplate(DeftempError):
    pass


class TooFewPoints(DeftempError):
    pass


class LengthMismatch(DeftempError):
    pass


class NegativeR(DeftempError):
    pass


# -- search failures ---------------------------------------------------------

class NoEdges(DeftempError):
    pass


class NoSearchSpace(DeftempError):
    pass


class NoCandidates(DeftempError):
    """Raised when every match candidate was filtered out.

    Carries per-stage diagnostics so callers can report why the search came
    up empty (edge count, ROI coverage, best rejected energy).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
