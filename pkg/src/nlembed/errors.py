"""Exception types.

Everything raised on purpose derives from :class:`NlembedError`. Input and
validation problems derive from :class:`InputError` (CLI exit code 2); a
model that picked up non-finite values raises :class:`NumericError` (exit 3).
"""


class NlembedError(Exception):
    pass


class InputError(NlembedError, ValueError):
    pass


class NumericError(NlembedError, ArithmeticError):
    pass


class DimensionMismatch(InputError):
    pass


class NegativeEntry(InputError):
    pass


class ZeroRow(InputError):
    pass


class NonFiniteEntry(InputError):
    pass


class NoPositivePairs(InputError):
    pass


class NoNegativePairs(InputError):
    pass


class EmptyPairSet(InputError):
    pass


class NotL1Normalized(InputError):
    pass


class TooManyAnchors(InputError):
    pass


class KExceedsGallery(InputError):
    pass


class BadMagic(InputError):
    pass


class UnsupportedVersion(InputError):
    pass


class CorruptPayload(InputError):
    pass


class RankDeficientWarning(UserWarning):
    """Fewer nonzero singular values than requested PCA components."""
