"""Exception types raised across the library.

Everything derives from RefSketchError so callers (and the CLI) can catch
domain failures with one handler while programming errors still surface as
plain Python exceptions.
"""


class RefSketchError(Exception):
    """Base class for all domain errors."""


# --- imaging ---------------------------------------------------------------

class MissingFile(RefSketchError):
    pass


class DecodeError(RefSketchError):
    pass


class ZeroSizeImage(RefSketchError):
    pass


class InvalidImage(RefSketchError):
    """An image tensor violates its channel/range/size invariants."""


class InvalidTarget(RefSketchError):
    pass


class WriteError(RefSketchError):
    pass


# --- attention / networks --------------------------------------------------

class ShapeMismatch(RefSketchError):
    pass


class ReductionMismatch(RefSketchError):
    pass


class ChannelMismatch(RefSketchError):
    pass


class ResolutionMismatch(RefSketchError):
    pass


class TooSmall(RefSketchError):
    pass


# --- losses ----------------------------------------------------------------

class EncoderNotFrozen(RefSketchError):
    pass


class ExtractorUnavailable(RefSketchError):
    pass


class ExtractorShapeMismatch(RefSketchError):
    pass


class NonFiniteTerm(RefSketchError):
    pass


class OutOfRangeEpoch(RefSketchError):
    pass


# --- pretraining / curation ------------------------------------------------

class InsufficientCorpus(RefSketchError):
    pass


class DivergenceDetected(RefSketchError):
    pass


class EmptyInput(RefSketchError):
    pass


class AllCulled(RefSketchError):
    pass


class EmptyDirectory(RefSketchError):
    pass


class IncompleteDataset(RefSketchError):
    def __init__(self, missing):
        self.missing = list(missing)
        super().__init__(f"dataset incomplete, missing: {', '.join(self.missing)}")


# --- training / evaluation / cli -------------------------------------------

class NonFiniteLoss(RefSketchError):
    pass


class CheckpointVersionMismatch(RefSketchError):
    pass


class DegenerateCovariance(RefSketchError):
    pass


class ConfigError(RefSketchError):
    pass
