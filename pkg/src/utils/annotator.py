"""
Document Annotation Utilities for Wiki-ES

This module turns documents into the Wiki-ES document model: the pair of
named-entity concepts N_d and general concepts G_d found in a document.

Key features:
- Gazetteer annotation: leftmost-longest matching of concept labels
  (titles, redirects, anchors) over Unicode word tokens
- Named-entity routing from the graph's per-concept flag
- Corpus files mixing raw-text and pre-annotated records
- qrels relevance files (topic, document, label)
- Text extraction from .txt, .md, .docx and .pdf documents

Dependencies:
- docx: For Word document text extraction
- PyPDF2: For PDF text extraction
- json: For corpus records
"""

import json
import re
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import docx
from PyPDF2 import PdfReader

from utils.concept_graph import ConceptGraph
from utils.errors import CorpusFormatError, UnknownConceptError
from utils.log_utils import get_logger

logger = get_logger(__name__)

MAX_LABEL_TOKENS = 6
DOCUMENT_SUFFIXES = (".txt", ".md", ".docx", ".pdf")

_TOKEN = re.compile(r"\w+")


def tokenize(text: str) -> List[str]:
    """Split text into case-folded Unicode word tokens."""
    return [match.group(0).casefold() for match in _TOKEN.finditer(text)]


@dataclass(frozen=True)
class RawDocument:
    doc_id: str
    text: str


@dataclass(frozen=True)
class DocumentProfile:
    """
    The document model Λ(d) = (N_d, G_d).

    The two collections are disjoint; every id belongs to the graph the profile
    was built against.
    """

    doc_id: str
    named_entities: FrozenSet[int] = frozenset()
    general_concepts: FrozenSet[int] = frozenset()

    def __post_init__(self):
        overlap = self.named_entities & self.general_concepts
        if overlap:
            raise ValueError(
                f"document {self.doc_id!r}: concept {min(overlap)} is both named entity and general"
            )

    @property
    def concepts(self) -> FrozenSet[int]:
        """N_d ∪ G_d."""
        return self.named_entities | self.general_concepts

    def is_empty(self) -> bool:
        return not self.named_entities and not self.general_concepts


@dataclass(frozen=True)
class CorpusRecord:
    """One corpus line: raw text or an explicit concept list, plus an optional label."""

    doc_id: str
    text: Optional[str] = None
    concepts: Optional[Tuple[int, ...]] = None
    relevance: Optional[int] = None


class Annotator:
    """
    Dictionary annotator over a concept graph.

    Labels are indexed by their token sequence. Annotation scans the token
    stream left to right, takes the longest label starting at each position
    (at most MAX_LABEL_TOKENS tokens), and skips past it, so matches never
    overlap. A label shared by several concepts resolves to the one with the
    most inlinks, the same rule resolve_label applies.
    """

    def __init__(self, graph: ConceptGraph, max_label_tokens: int = MAX_LABEL_TOKENS):
        self.graph = graph
        self.max_label_tokens = max_label_tokens

        index: Dict[Tuple[str, ...], set] = {}
        for label, ids in graph.labels().items():
            key = tuple(tokenize(label))
            if not key or len(key) > max_label_tokens:
                continue
            index.setdefault(key, set()).update(ids)
        self._index = {key: graph.most_common(sorted(ids)) for key, ids in index.items()}
        self._longest = max((len(key) for key in self._index), default=0)

    def find_concepts(self, text: str) -> List[int]:
        """Concept ids of all label matches in text order (may repeat)."""
        tokens = tokenize(text)
        found = []
        position = 0
        while position < len(tokens):
            span = min(self._longest, len(tokens) - position)
            for length in range(span, 0, -1):
                concept_id = self._index.get(tuple(tokens[position:position + length]))
                if concept_id is not None:
                    found.append(concept_id)
                    position += length
                    break
            else:
                position += 1
        return found

    def annotate(self, doc: RawDocument) -> DocumentProfile:
        return profile_from_concepts(self.graph, doc.doc_id, self.find_concepts(doc.text))


@lru_cache(maxsize=8)
def _annotator_for(graph: ConceptGraph) -> Annotator:
    return Annotator(graph)


def annotate(graph: ConceptGraph, doc: RawDocument) -> DocumentProfile:
    """
    Annotate a raw document against a graph.

    Args:
        graph (ConceptGraph): The active concept graph
        doc (RawDocument): Document to annotate; empty text gives an empty profile

    Returns:
        DocumentProfile: Recognised concepts split by the named-entity flag
    """
    return _annotator_for(graph).annotate(doc)


def profile_from_concepts(graph: ConceptGraph, doc_id: str, concept_ids: Iterable[int]) -> DocumentProfile:
    """
    Route concept ids into N_d and G_d using the graph's named-entity flags.

    Raises:
        UnknownConceptError: If an id is not in the graph (names the document)
    """
    named, general = set(), set()
    for concept_id in concept_ids:
        if concept_id not in graph:
            raise UnknownConceptError(concept_id, doc_id)
        if graph.concept(concept_id).is_named_entity:
            named.add(concept_id)
        else:
            general.add(concept_id)
    return DocumentProfile(doc_id, frozenset(named), frozenset(general))


def parse_corpus_lines(lines: Iterable[str]) -> List[CorpusRecord]:
    """
    Parse corpus records, one JSON object per line.

    Raises:
        CorpusFormatError: On malformed records or duplicate doc ids
    """
    records = []
    seen = set()
    for number, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as e:
            raise CorpusFormatError(f"invalid JSON ({e.msg})", number) from e
        if not isinstance(data, dict):
            raise CorpusFormatError("record must be a JSON object", number)

        doc_id = data.get("doc_id")
        if not isinstance(doc_id, str) or not doc_id:
            raise CorpusFormatError("field 'doc_id' must be a non-empty string", number)
        if doc_id in seen:
            raise CorpusFormatError(f"duplicate doc_id {doc_id!r}", number)
        seen.add(doc_id)

        has_text, has_concepts = "text" in data, "concepts" in data
        if has_text == has_concepts:
            raise CorpusFormatError(
                f"document {doc_id!r} must carry exactly one of 'text' or 'concepts'", number
            )
        text = data.get("text")
        if has_text and not isinstance(text, str):
            raise CorpusFormatError("field 'text' must be a string", number)
        concepts = data.get("concepts")
        if has_concepts:
            if not isinstance(concepts, list) or not all(
                isinstance(item, int) and not isinstance(item, bool) for item in concepts
            ):
                raise CorpusFormatError("field 'concepts' must be an array of integers", number)
            concepts = tuple(concepts)

        relevance = data.get("relevance")
        if relevance is not None and (isinstance(relevance, bool) or relevance not in (0, 1)):
            raise CorpusFormatError("field 'relevance' must be 0 or 1", number)

        records.append(CorpusRecord(doc_id, text, concepts, relevance))
    return records


def load_corpus(path: Union[str, Path]) -> List[CorpusRecord]:
    """Read a corpus file of raw-text and/or pre-annotated records."""
    with open(path, encoding="utf-8") as handle:
        records = parse_corpus_lines(handle)
    logger.info("Loaded %d corpus records from %s", len(records), path)
    return records


def profile_for(graph: ConceptGraph, record: CorpusRecord) -> DocumentProfile:
    if record.text is not None:
        return annotate(graph, RawDocument(record.doc_id, record.text))
    return profile_from_concepts(graph, record.doc_id, record.concepts)


def profiles_from_records(records: Sequence[CorpusRecord], graph: ConceptGraph) -> List[DocumentProfile]:
    """Annotate text records and validate pre-annotated ones, in corpus order."""
    return [profile_for(graph, record) for record in records]


def load_profiles(path: Union[str, Path], graph: ConceptGraph) -> List[DocumentProfile]:
    """
    Load a corpus file as document profiles.

    Args:
        path (str | Path): Corpus file
        graph (ConceptGraph): Graph used for annotation and validation

    Returns:
        list[DocumentProfile]: One profile per record, in file order
    """
    return profiles_from_records(load_corpus(path), graph)


def load_qrels(path: Union[str, Path]) -> Dict[str, Dict[str, int]]:
    """
    Read a qrels file with lines ``topic_id TAB doc_id TAB relevance``.

    Blank lines and lines starting with ``#`` are skipped.

    Returns:
        dict: topic_id -> {doc_id: 0 | 1}
    """
    qrels: Dict[str, Dict[str, int]] = {}
    with open(path, encoding="utf-8") as handle:
        for number, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3 or parts[2].strip() not in ("0", "1"):
                raise CorpusFormatError("expected 'topic_id<TAB>doc_id<TAB>0|1'", number)
            topic, doc_id, relevance = (part.strip() for part in parts)
            qrels.setdefault(topic, {})[doc_id] = int(relevance)
    return qrels


def relevance_labels(records: Sequence[CorpusRecord],
                     qrels: Optional[Mapping[str, int]] = None,
                     default: Optional[int] = None, inline: bool = True) -> List[int]:
    """
    Relevance of every record; qrels entries override inline labels and
    default (when given) labels documents judged by neither.

    With inline=False the records' own labels are ignored, so only qrels and
    default decide.

    Raises:
        CorpusFormatError: If a record has no label from either source
    """
    labels = []
    for record in records:
        label = qrels.get(record.doc_id) if qrels is not None else None
        if label is None and inline:
            label = record.relevance
        if label is None:
            label = default
        if label is None:
            raise CorpusFormatError(f"missing relevance label for document {record.doc_id!r}")
        labels.append(int(label))
    return labels


def _extract_text_from_docx(path: Path) -> str:
    document = docx.Document(str(path))
    parts = [para.text for para in document.paragraphs if para.text]
    for table in document.tables:
        for row in table.rows:
            cells = [cell.text for cell in row.cells if cell.text]
            if cells:
                parts.append(" | ".join(cells))
    return "\n\n".join(parts)


def _extract_text_from_pdf(path: Path) -> str:
    reader = PdfReader(str(path))
    parts = []
    for page in reader.pages:
        text = page.extract_text()
        if text:
            parts.append(text)
    return "\n\n".join(parts)


def read_document(path: Union[str, Path]) -> RawDocument:
    """
    Read a document file as raw text; the doc id is the file stem.

    Args:
        path (str | Path): A .txt, .md, .docx or .pdf file

    Returns:
        RawDocument: The extracted text

    Raises:
        CorpusFormatError: For unsupported file types
    """
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix in (".txt", ".md"):
        text = path.read_text(encoding="utf-8")
    elif suffix == ".docx":
        text = _extract_text_from_docx(path)
    elif suffix == ".pdf":
        text = _extract_text_from_pdf(path)
    else:
        raise CorpusFormatError(f"unsupported document type {suffix!r} ({path.name})")
    logger.debug("Read %d characters from %s", len(text), path)
    return RawDocument(path.stem, text)


def read_documents(directory: Union[str, Path]) -> List[RawDocument]:
    """Read every supported document in a directory, sorted by file name."""
    paths = sorted(
        p for p in Path(directory).iterdir() if p.is_file() and p.suffix.lower() in DOCUMENT_SUFFIXES
    )
    return [read_document(p) for p in paths]


def profile_record(profile: DocumentProfile, relevance: Optional[int] = None) -> dict:
    """The pre-annotated corpus record of a profile (N_d first, then G_d)."""
    record = {
        "doc_id": profile.doc_id,
        "concepts": sorted(profile.named_entities) + sorted(profile.general_concepts),
    }
    if relevance is not None:
        record["relevance"] = relevance
    return record


def write_profiles(path: Union[str, Path], profiles: Sequence[DocumentProfile],
                   relevance: Optional[Sequence[Optional[int]]] = None) -> None:
    """Write profiles as a pre-annotated corpus file."""
    labels = relevance if relevance is not None else [None] * len(profiles)
    with open(path, "w", encoding="utf-8") as handle:
        for profile, label in zip(profiles, labels):
            handle.write(json.dumps(profile_record(profile, label), ensure_ascii=False) + "\n")
