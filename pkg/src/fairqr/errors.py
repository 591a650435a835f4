"""Exception hierarchy shared across the toolkit."""


class FairQRError(Exception):
    """Base class for all toolkit errors."""


class IngestionError(FairQRError):
    """Malformed corpus record; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(FairQRError):
    """Group label or category not declared in the schema."""


class DuplicateIdError(FairQRError):
    """Document id seen more than once during ingestion."""


class CorpusLookupError(FairQRError):
    """Unknown document id or category."""


class IndexBuildError(FairQRError):
    """Index construction failed (e.g. empty corpus)."""


class EmptyQueryError(FairQRError):
    """Query tokenized to nothing."""


class DimensionError(FairQRError):
    """Distribution vectors of mismatched length."""


class DegenerateExposureError(FairQRError):
    """Exposure requested over an empty ranked list."""


class NoTargetError(FairQRError):
    """No relevant documents to derive a fairness target from."""


class TemplateError(FairQRError):
    """Prompt template is missing a required placeholder."""


class ParseError(FairQRError):
    """Model response did not contain the refined-query marker."""

    def __init__(self, message: str, fallback_query: str = ""):
        self.fallback_query = fallback_query
        super().__init__(message)


class RefinerError(FairQRError):
    """Refinement failed (transport, lexicon, or parse failure)."""


class LexiconError(RefinerError):
    """Subgroup has no lexicon entry."""


class InputError(FairQRError):
    """Invalid arguments to an evaluation routine."""


class SpecError(FairQRError):
    """Invalid synthetic-corpus specification."""


class RunFileError(FairQRError):
    """Malformed TREC run or qrels line; carries the line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
