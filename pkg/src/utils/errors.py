"""
Error types for Wiki-ES.

Every failure the package raises on purpose derives from WikiEsError so the
command-line front door can map it to exit status 1. Input-format problems
also derive from ValueError and lookups of unknown ids from KeyError, which
keeps plain ``except ValueError`` call sites working.
"""

from typing import Optional


class WikiEsError(Exception):
    """Base class for all Wiki-ES errors."""


class GraphFormatError(WikiEsError, ValueError):
    """A concept graph file is malformed."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateIdError(GraphFormatError):
    """Two graph records share a concept id."""

    def __init__(self, concept_id: int, line: Optional[int] = None):
        self.concept_id = concept_id
        super().__init__(f"duplicate concept id {concept_id}", line)


class DanglingReferenceError(GraphFormatError):
    """An inlink points at a concept that is not in the graph."""

    def __init__(self, concept_id: int, referenced_by: int):
        self.concept_id = concept_id
        self.referenced_by = referenced_by
        super().__init__(
            f"inlink of concept {referenced_by} references unknown concept id {concept_id}"
        )


class UnknownConceptError(WikiEsError, KeyError):
    """A concept id is not part of the active graph."""

    def __init__(self, concept_id: int, doc_id: Optional[str] = None):
        self.concept_id = concept_id
        self.doc_id = doc_id
        message = f"unknown concept id {concept_id}"
        if doc_id is not None:
            message += f" in document {doc_id!r}"
        super().__init__(message)

    def __str__(self):
        # KeyError would quote the message
        return self.args[0]


class CorpusFormatError(WikiEsError, ValueError):
    """A corpus or qrels file is malformed."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class QueryParseError(WikiEsError, ValueError):
    """A prefix query expression cannot be parsed."""

    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(f"{message} at position {position}")


class RuleFormatError(WikiEsError, ValueError):
    """A rule file does not describe a valid Wiki-ES rule."""


class ConfigError(WikiEsError, ValueError):
    """A configuration file or flag value is invalid."""


class DegenerateTrainingSetError(WikiEsError, ValueError):
    """The training set lacks relevant or irrelevant examples."""


class NoCandidateTerminalsError(WikiEsError, ValueError):
    """The relevant training documents contain no concepts."""

    def __init__(self, message: str = "no candidate terminals"):
        super().__init__(message)


class EvaluationError(WikiEsError, ValueError):
    """Scoring inputs are incomplete."""
