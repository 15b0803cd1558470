"""Exception taxonomy shared across the package.

Validation problems (bad configs, malformed datasets, incompatible
checkpoints) and numerical failures (non-finite losses or gradients) are kept
distinct so the command line can map them to different exit codes.
"""


class LumisplatError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(LumisplatError):
    """Malformed input: config, manifest, checkpoint, or array shapes."""


class EmptySceneError(ValidationError):
    """Scene construction produced no anchors."""


class NumericalError(LumisplatError):
    """A non-finite value appeared where the pipeline requires finite math."""
