"""Exception hierarchy shared by all modules."""


class HPSError(Exception):
    """Base class for every error raised by the package."""


class DegenerateInput(HPSError):
    pass


class NotWatertight(HPSError):
    pass


class ResolutionTooCoarse(HPSError):
    pass


class EmptyGrid(HPSError):
    pass


class DegenerateMesh(HPSError):
    pass


class TooFewPoints(HPSError):
    pass


class MissingNormals(HPSError):
    pass


class DisconnectedComplex(HPSError):
    pass


class KOutOfRange(HPSError):
    pass


class EmptyPart(HPSError):
    pass


class FrameMismatch(HPSError):
    pass


class ZeroTotalMass(HPSError):
    pass


class NoStalledSamples(HPSError):
    pass


class TooManyParts(HPSError):
    pass


class ShapeMismatch(HPSError):
    pass


class ZeroColumn(HPSError):
    pass


class NotSPD(HPSError):
    pass


class OverlappingParts(HPSError):
    pass


class NonPositiveDensity(HPSError):
    pass


class InvalidSpec(HPSError):
    pass


class FormatError(HPSError, ValueError):
    pass
