"""Exception hierarchy.

Errors split into two families so the CLI can map them onto exit codes:
``FormatError`` (bad files, inconsistent inputs; exit 2) and everything
else deriving from ``PoseCodecError`` (validation failures; exit 1).
"""


class PoseCodecError(Exception):
    pass


class SkeletonError(PoseCodecError):
    """Skeleton definition violates the tree/limb invariants."""


class NonUnitOrientation(PoseCodecError):
    pass


class BehindCamera(PoseCodecError):
    pass


class DegenerateOrientation(PoseCodecError):
    def __init__(self, limb, message=None):
        self.limb = limb
        super().__init__(message or f"limb {limb}: mean orientation vanishes in crop region")


class ShapeMismatch(PoseCodecError):
    pass


class DegenerateConfiguration(PoseCodecError):
    pass


class EmptyInput(PoseCodecError):
    pass


class FormatError(PoseCodecError):
    pass


class JointCountMismatch(FormatError):
    pass


class BadMagic(FormatError):
    pass


class CrcMismatch(FormatError):
    pass


class TruncatedFile(FormatError):
    pass


class FrameOrderError(FormatError):
    pass
