"""Exception hierarchy shared by all asmtok modules.

Everything raised on bad *data* (malformed corpora, model files, ids)
derives from DataError so the CLI can map it to exit code 2; genuine
programmer errors stay as builtin exceptions.
"""


class AsmtokError(Exception):
    pass


class DataError(AsmtokError):
    pass


class EmptyFunctionError(DataError):
    """A function record ended up with zero instruction lines."""


class InvalidRecordError(DataError):
    """A record violates structural invariants (empty name, embedded newline...)."""


class CorpusTooSmallError(DataError):
    """The corpus has too few records for the requested operation."""


class CorpusFormatError(DataError):
    """A corpus file line failed to parse or violates the schema."""

    def __init__(self, message, line_number=None):
        super().__init__(message)
        self.line_number = line_number


class MalformedHexError(DataError):
    """A token looked like a hex literal but could not be converted."""


class InvalidUtf8Error(DataError):
    pass


class SchemaError(DataError):
    """A model file violates the tokenizer-model schema."""


class UnknownIdError(DataError):
    """decode() was handed an id outside the vocabulary."""


class VocabTooSmallError(DataError):
    """Requested vocabulary size cannot hold specials + initial alphabet."""


class TooFewModelsError(DataError):
    """Overlap metrics need at least two models."""


class EmptyCorpusError(DataError):
    pass


class EmptyEncodingError(DataError):
    """Masking was asked to mask a function whose encoding is empty."""


class UnsegmentableError(DataError):
    """A piece contains a unit absent from the unigram vocabulary."""
