"""Exception types raised across the toolkit.

Every error carries a human-readable message; errors that point at a file
location also carry a 1-based ``line_no``.
"""


class PsaError(Exception):
    """Base class for all toolkit errors."""


# --- corpus ---------------------------------------------------------------

class MalformedRow(PsaError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class EmptyDataset(PsaError):
    pass


class MissingAnnotations(PsaError):
    pass


class UnlabeledReview(PsaError):
    pass


class DatasetTooSmall(PsaError):
    pass


# --- embeddings -----------------------------------------------------------

class BadHeader(PsaError):
    pass


class DimensionMismatch(PsaError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class NonFiniteValue(PsaError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


# --- neural kernel --------------------------------------------------------

class ShapeMismatch(PsaError):
    pass


class InputTooShort(PsaError):
    pass


class NonFiniteInput(PsaError):
    pass


class StaleCache(PsaError):
    pass


class NonFiniteGradient(PsaError):
    pass


class NonFiniteLoss(PsaError):
    pass


# --- models ---------------------------------------------------------------

class BadDimension(PsaError):
    pass


class SequenceTooShort(PsaError):
    pass


class EncodingMismatch(PsaError):
    pass


class WrongModelKind(PsaError):
    pass


class BadMagic(PsaError):
    pass


class VersionUnsupported(PsaError):
    pass


class ChecksumMismatch(PsaError):
    pass


class ShapeHeaderMismatch(PsaError):
    pass


# --- evaluation -----------------------------------------------------------

class LengthMismatch(PsaError):
    pass


class EmptyMatrix(PsaError):
    pass
