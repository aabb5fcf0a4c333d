"""Error taxonomy shared across the pipeline.

Every exception carries a stable ``code`` string so the CLI can map
failures to exit codes and reports can name the failure class without
parsing messages.
"""


class LipincError(Exception):
    """Base class; ``code`` identifies the failure class."""

    code = "E_INTERNAL"

    def __init__(self, message=""):
        super().__init__(message)
        self.message = message

    def __str__(self):
        return f"{self.code}: {self.message}" if self.message else self.code


class ParseError(LipincError):
    code = "E_PARSE"


class SchemaError(LipincError):
    code = "E_SCHEMA"


class ImageError(LipincError):
    code = "E_IMAGE"


class DegenerateGeometryError(LipincError):
    code = "E_DEGENERATE"


class NoOpenMouthError(LipincError):
    code = "E_NO_OPEN_MOUTH"


class TooShortError(LipincError):
    code = "E_TOO_SHORT"


class InsufficientGlobalError(LipincError):
    code = "E_INSUFFICIENT_GLOBAL"


class ShapeError(LipincError):
    code = "E_SHAPE"


class NotScalarError(LipincError):
    code = "E_NOT_SCALAR"


class EmptyBatchError(LipincError):
    code = "E_EMPTY_BATCH"


class EmptyError(LipincError):
    code = "E_EMPTY"


class EmptyDatasetError(LipincError):
    code = "E_EMPTY_DATASET"


class SingleClassError(LipincError):
    code = "E_SINGLE_CLASS"


class NoPositivesError(LipincError):
    code = "E_NO_POSITIVES"


class IOFailure(LipincError):
    code = "E_IO"


class VersionError(LipincError):
    code = "E_VERSION"


class CorruptError(LipincError):
    code = "E_CORRUPT"


#: Errors that indicate bad input data rather than a bug; the CLI exits 2.
DATA_ERRORS = (
    ParseError,
    SchemaError,
    ImageError,
    DegenerateGeometryError,
    NoOpenMouthError,
    TooShortError,
    InsufficientGlobalError,
    EmptyBatchError,
    EmptyError,
    EmptyDatasetError,
    SingleClassError,
    NoPositivesError,
    IOFailure,
    VersionError,
    CorruptError,
)
