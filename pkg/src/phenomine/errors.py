"""Error taxonomy shared across the pipeline.

Three families, mapped onto CLI exit codes:

  ConfigError     -> exit 2  (bad flags, bad config file, degenerate settings)
  DataError       -> exit 3  (malformed or stale inputs, empty corpora, ...)
  InternalError   -> exit 4  (invariant violations; these are bugs, not user error)

Every error message should name the offending file, field or value so a
failing stage can be diagnosed from the message alone.
"""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 4


class ConfigError(PipelineError):
    """Invalid configuration: unknown keys, unparsable values, bad ranges."""

    exit_code = 2


class DegenerateConfig(ConfigError):
    """Settings that are syntactically fine but make no sense (k < 1, alpha <= 0, ...)."""


class DataError(PipelineError):
    """Malformed, inconsistent or missing input data."""

    exit_code = 3


class SchemaError(DataError):
    """A delimited file does not have the expected header or field count."""


class BadDate(DataError):
    """A date field failed to parse as an ISO calendar date."""


class InvalidInterval(DataError):
    """Discharge precedes admission for an encounter."""


class NegativeDuration(InvalidInterval):
    """Alias kept for call sites that test duration arithmetic directly."""


class DuplicateEncounter(DataError):
    """The same encounter id appeared twice in one input file."""


class EmptyFile(DataError):
    """An input file contained no data rows."""


class EmptyCorpus(DataError):
    """No usable documents remain after preprocessing."""


class VocabMismatch(DataError):
    """A model was asked to score vectors built against a different vocabulary."""


class EmptyIntersection(DataError):
    """Feature assembly found no encounter present in every required source."""


class TooFewPerClass(DataError):
    """A stratified operation needs at least two rows per class."""


class DegenerateData(DataError):
    """A training set lacks the variation the estimator requires."""


class NonFinite(DataError):
    """NaN or infinity encountered where a finite value is required."""


class WidthMismatch(DataError):
    """Two row sets that must share a column layout do not."""


class EmptyTest(DataError):
    """An evaluation was attempted against an empty test partition."""


class UnknownPatient(DataError):
    """A trajectory was requested for a patient id absent from the cohort."""


class BadDimensions(DataError):
    """An array argument has the wrong shape."""


class DimensionMismatch(BadDimensions):
    """Two matrices that must agree on a dimension do not."""


class MissingArtifact(DataError):
    """A stage input file does not exist."""


class DigestMismatch(DataError):
    """A stage input file changed since the downstream artifact was written."""


class InvariantViolation(PipelineError):
    """An internal consistency check failed. Always a bug."""

    exit_code = 4
