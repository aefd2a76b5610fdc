"""Exception taxonomy.

Every library error derives from exactly one of four category classes, and each
category owns the CLI exit code it maps to.
"""

from __future__ import annotations


class CheckSupportError(Exception):
    exit_code = 1


# -- categories ---------------------------------------------------------------


class UsageError(CheckSupportError):
    exit_code = 2


class BackendError(CheckSupportError):
    """A model backend failed or produced unusable output.

    ``section_index``, ``item_id`` and ``partial`` are filled in by the pipeline
    when the failure happens inside a run, so callers can see where it stopped.
    """

    exit_code = 3

    def __init__(self, message: str = "", **context):
        super().__init__(message)
        self.section_index = context.get("section_index")
        self.item_id = context.get("item_id")
        self.partial = context.get("partial")


class ParseError(CheckSupportError):
    exit_code = 4


class EvaluationMismatch(CheckSupportError):
    exit_code = 5


# -- text ingestion -------------------------------------------------------------


class DocumentNotFound(UsageError):
    pass


class UnsupportedFormat(ParseError):
    pass


class EmptyDocument(ParseError):
    pass


class ExtractionFailed(ParseError):
    pass


class InvalidWindowParams(UsageError):
    pass


# -- checklists -----------------------------------------------------------------


class NoItemsFound(ParseError):
    pass


class DuplicateItemId(ParseError):
    pass


class InvalidTemplate(ParseError):
    pass


class TemplateNotFound(UsageError):
    pass


# -- inference ------------------------------------------------------------------


class InvalidRequest(UsageError):
    pass


class BackendUnavailable(BackendError):
    pass


class ModelNotFound(BackendError):
    pass


class GenerationTimeout(BackendError):
    pass


class ServerError(BackendError):
    pass


class UnscriptedPrompt(BackendError):
    pass


class AmbiguousScript(BackendError):
    pass


# -- pipeline -------------------------------------------------------------------


class EmptyCandidates(UsageError):
    pass


class EmptyManuscript(ParseError):
    pass


class ContextBudgetExceeded(UsageError):
    pass


class UnrecognizedChecklistName(BackendError):
    pass


# -- report ---------------------------------------------------------------------


class TemplateMismatch(ParseError):
    pass


class RenderFailed(ParseError):
    pass


# -- evaluation -----------------------------------------------------------------


class MissingPrediction(EvaluationMismatch):
    def __init__(self, missing):
        self.missing = sorted(missing)
        super().__init__("missing predictions for: " + ", ".join(map(str, self.missing)))


class NoData(UsageError):
    pass


class MalformedRecord(UsageError):
    def __init__(self, path, line_no: int, reason: str):
        self.path = path
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {reason}")


CATEGORIES = (UsageError, BackendError, ParseError, EvaluationMismatch)
