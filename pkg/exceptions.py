class SymScanError(Exception):
    """Base class for every error raised by the library."""


class InputError(SymScanError):
    """The input scan, spec batch or report is unusable. CLI exit status 1."""


class ClusteringError(SymScanError):
    """A clustering or comparison precondition does not hold."""


class ConfigError(SymScanError):
    """Invalid or contradictory configuration. CLI exit status 2."""


# image-io
class MalformedHeader(InputError):
    pass


class UnsupportedFeature(InputError):
    pass


class TruncatedPixelData(InputError):
    pass


# asymmetry
class FlatImage(InputError):
    pass


class EmptyMask(InputError):
    pass


# reports / phantoms
class EmptyInput(InputError):
    pass


class InvalidSpec(InputError):
    pass


class ZeroBaseline(InputError):
    pass


# symclust
class DegenerateCluster(ClusteringError):
    pass


class TooFewPoints(ClusteringError):
    pass


class SingleCluster(ClusteringError):
    pass


class BadRange(ClusteringError):
    pass