"""Exception types shared across the package."""


class DataError(Exception):
    """Malformed model container, manifest, or report data."""


class ManifestError(DataError):
    """model.json is missing, unparsable, or violates a structural invariant."""


class WeightBlobError(DataError):
    """A layer weight blob is missing or its byte length is wrong."""


class ReportError(DataError):
    """A pruning report file is malformed."""


class EvaluatorError(Exception):
    """The evaluator died, timed out, or broke the wire protocol."""


class UsageError(Exception):
    """Bad command line arguments or environment configuration."""
