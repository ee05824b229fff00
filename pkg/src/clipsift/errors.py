"""Exception taxonomy.

Everything raised on purpose derives from ClipsiftError. DataError marks
problems with user-supplied data (bad manifests, malformed media, label
bookkeeping); these map to CLI exit code 2. UsageError maps to exit code 1.
"""


class ClipsiftError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(ClipsiftError):
    """Bad invocation (CLI arguments, impossible parameter combinations)."""


class DataError(ClipsiftError):
    """User data violates a documented contract."""


# -- manifest / dataset ------------------------------------------------------

class DuplicateClipId(DataError):
    def __init__(self, clip_id: str):
        super().__init__(f"duplicate clipId {clip_id!r} in manifest")
        self.clip_id = clip_id


class DanglingLabel(DataError):
    def __init__(self, clip_id: str, coder_id: str = ""):
        who = f" (coder {coder_id!r})" if coder_id else ""
        super().__init__(f"label references unknown clipId {clip_id!r}{who}")
        self.clip_id = clip_id
        self.coder_id = coder_id


class BadDuration(DataError):
    def __init__(self, clip_id: str, duration):
        super().__init__(f"clip {clip_id!r} has nonpositive duration {duration!r}")
        self.clip_id = clip_id


class InvalidManifest(DataError):
    pass


class MissingFeatures(DataError):
    def __init__(self, clip_id: str):
        super().__init__(f"no features stored for clip {clip_id!r}")
        self.clip_id = clip_id


class MissingExternalChannel(DataError):
    def __init__(self, clip_id: str, channel: str, index: int):
        super().__init__(
            f"external channel {channel!r} missing for clip {clip_id!r} micro-clip {index}"
        )
        self.clip_id = clip_id
        self.channel = channel
        self.index = index


# -- numerics ----------------------------------------------------------------

class DimensionMismatch(DataError):
    pass


class EmptyPool(DataError):
    pass


class EmptyInput(DataError):
    pass


# -- media containers --------------------------------------------------------

class MediaError(DataError):
    pass


class BadMagic(MediaError):
    pass


class TruncatedPayload(MediaError):
    pass


class UnsupportedPixelFormat(MediaError):
    pass


class InconsistentFrameDimensions(MediaError):
    pass


class NotRiffWave(MediaError):
    pass


class UnsupportedEncoding(MediaError):
    pass


class ZeroSamples(MediaError):
    pass


class NonPositiveDuration(DataError):
    pass


class NonPositiveSegmentLength(DataError):
    pass


# -- feature extraction ------------------------------------------------------

class NoFramesInWindow(DataError):
    pass


class DegenerateFrame(DataError):
    pass


class EmptySpan(DataError):
    pass


# -- clustering --------------------------------------------------------------

class AssignmentMismatch(DataError):
    pass


# -- learning ----------------------------------------------------------------

class SingleClassInput(DataError):
    pass


class MissingClass(DataError):
    pass


class EmptyBag(DataError):
    pass


# -- evaluation --------------------------------------------------------------

class LengthMismatch(DataError):
    pass


class TooFewBags(DataError):
    pass


class SingleClassDataset(DataError):
    pass


class SizeTooLarge(DataError):
    pass


class DegenerateExpectedAgreement(DataError):
    pass


class NoPredictedPositives(DataError):
    pass


class CapacityExceedsSet(DataError):
    pass


class BadSpec(DataError):
    pass


# -- service -----------------------------------------------------------------

class NotFound(DataError):
    pass


class UnknownSession(DataError):
    pass


class UnknownClip(DataError):
    pass


class RetrainInProgress(ClipsiftError):
    pass


class FeaturePipelineFailure(ClipsiftError):
    pass
