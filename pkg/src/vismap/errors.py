"""Exception types raised across the toolkit."""


class VismapError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(VismapError):
    """A domain-type invariant was violated."""


class DimensionMismatch(VismapError):
    """Two descriptors (or a descriptor and a store) disagree on dimensionality."""


class MissingReference(VismapError):
    """A gallery references a (traversal, frame index) that cannot be resolved."""


class BundleFormatError(VismapError):
    """An on-disk traversal bundle is malformed or cannot be read/written."""


class ConfigError(VismapError):
    """A sampler, fold, or localization configuration is invalid."""
