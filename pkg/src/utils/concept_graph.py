"""
Concept Graph Utilities for Wiki-ES

This module stores the Wikipedia-style link structure between concepts and
computes link-based relatedness, both between two concepts and between a
concept and an annotated document.

Key features:
- Concept records with title, redirects, anchors and a named-entity flag
- Line-delimited JSON graph loading with full validation
- Label resolution over titles, redirects and anchors (commonness tie-break)
- Link relatedness derived from the normalised link-distance form
- Document-concept relatedness as the best link relatedness in a profile

Relatedness is 1 - clamp(dist, 0, 1) where

    dist = (log max(|W1|,|W2|) - log |W1 ∩ W2|) / (log |W| - log min(|W1|,|W2|))

and W1, W2 are the inlink sets of the two concepts. Natural logarithms are
used; the ratio does not depend on the base.

Dependencies:
- numpy: Sorted inlink arrays and linear-merge intersection
- json: For the graph file format
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from utils.errors import (
    DanglingReferenceError,
    DuplicateIdError,
    GraphFormatError,
    UnknownConceptError,
)
from utils.log_utils import get_logger

logger = get_logger(__name__)

GRAPH_FIELDS = ("id", "title", "redirects", "anchors", "inlinks", "named_entity")


def fold(label: str) -> str:
    """Case-fold a label and collapse inner whitespace."""
    return " ".join(label.casefold().split())


@dataclass(frozen=True)
class Concept:
    """A uniquely identified Wikipedia-style article standing in for a concept."""

    id: int
    title: str
    redirects: FrozenSet[str] = frozenset()
    anchors: FrozenSet[str] = frozenset()
    is_named_entity: bool = False

    @classmethod
    def create(cls, id: int, title: str, redirects: Iterable[str] = (),
               anchors: Iterable[str] = (), is_named_entity: bool = False) -> "Concept":
        """
        Build a concept with deduplicated labels.

        Redirects equal to the title and anchors equal to the title or a
        redirect (after case-folding) are dropped.

        Raises:
            ValueError: If the title is empty
        """
        title = title.strip()
        if not fold(title):
            raise ValueError(f"concept {id} has an empty title")

        seen = {fold(title)}
        kept_redirects = []
        for label in redirects:
            key = fold(label)
            if key and key not in seen:
                seen.add(key)
                kept_redirects.append(label.strip())
        kept_anchors = []
        for label in anchors:
            key = fold(label)
            if key and key not in seen:
                seen.add(key)
                kept_anchors.append(label.strip())

        return cls(
            id=int(id),
            title=title,
            redirects=frozenset(kept_redirects),
            anchors=frozenset(kept_anchors),
            is_named_entity=bool(is_named_entity),
        )

    def labels(self) -> Tuple[str, ...]:
        """All surface labels: title, redirects, anchors."""
        return (self.title, *sorted(self.redirects), *sorted(self.anchors))


class ConceptGraph:
    """
    Immutable concept link structure.

    The graph owns the concepts, the per-concept inlink sets (stored as sorted,
    deduplicated numpy arrays) and a folded-label index. Nothing mutates it
    after construction, so every read is safe from any number of threads.
    """

    def __init__(self, concepts: Iterable[Concept], inlinks: Mapping[int, Iterable[int]]):
        """
        Build and validate a graph.

        Args:
            concepts (Iterable[Concept]): The concepts; ids must be unique
            inlinks (Mapping[int, Iterable[int]]): Ids of the concepts linking to each concept

        Raises:
            DuplicateIdError: If two concepts share an id
            DanglingReferenceError: If an inlink names an unknown concept
            GraphFormatError: If the graph is empty
        """
        self._concepts: Dict[int, Concept] = {}
        for concept in concepts:
            if concept.id in self._concepts:
                raise DuplicateIdError(concept.id)
            self._concepts[concept.id] = concept
        if not self._concepts:
            raise GraphFormatError("no concepts")

        self._inlinks: Dict[int, np.ndarray] = {}
        for concept_id in self._concepts:
            links = np.unique(np.asarray(list(inlinks.get(concept_id, ())), dtype=np.int64))
            for source in links.tolist():
                if source not in self._concepts:
                    raise DanglingReferenceError(source, concept_id)
            links.flags.writeable = False
            self._inlinks[concept_id] = links
        unknown = set(inlinks) - set(self._concepts)
        if unknown:
            raise GraphFormatError(f"inlinks given for unknown concept id {min(unknown)}")

        label_index: Dict[str, list] = {}
        for concept in self._concepts.values():
            for label in concept.labels():
                label_index.setdefault(fold(label), []).append(concept.id)
        self._label_index: Dict[str, Tuple[int, ...]] = {
            label: tuple(sorted(ids)) for label, ids in label_index.items()
        }

    @property
    def total_count(self) -> int:
        """|W|, the number of concepts in the graph."""
        return len(self._concepts)

    def __contains__(self, concept_id: object) -> bool:
        return concept_id in self._concepts

    def __len__(self) -> int:
        return len(self._concepts)

    def ids(self) -> Tuple[int, ...]:
        return tuple(sorted(self._concepts))

    def concept(self, concept_id: int) -> Concept:
        """Return a concept or raise UnknownConceptError."""
        try:
            return self._concepts[concept_id]
        except KeyError:
            raise UnknownConceptError(concept_id) from None

    def require(self, concept_id: int) -> None:
        if concept_id not in self._concepts:
            raise UnknownConceptError(concept_id)

    def inlinks(self, concept_id: int) -> np.ndarray:
        """The sorted, read-only inlink array W_i of a concept."""
        self.require(concept_id)
        return self._inlinks[concept_id]

    def inlink_count(self, concept_id: int) -> int:
        return int(self.inlinks(concept_id).size)

    def labels(self) -> Mapping[str, Tuple[int, ...]]:
        """Folded label -> ids of the concepts carrying it."""
        return self._label_index

    def most_common(self, candidates: Sequence[int]) -> int:
        """Pick the candidate with the most inlinks; smaller id wins ties."""
        return min(candidates, key=lambda cid: (-self._inlinks[cid].size, cid))

    def resolve_label(self, surface: str) -> Optional[int]:
        """
        Resolve a surface string to a concept id.

        Args:
            surface (str): Text compared against titles, redirects and anchors after case-folding

        Returns:
            int | None: The matching concept with the largest inlink count, or None
        """
        candidates = self._label_index.get(fold(surface))
        if not candidates:
            return None
        return self.most_common(candidates)

    def link_rel(self, w1: int, w2: int) -> float:
        """
        Link relatedness of two concepts, a symmetric score in [0, 1].

        Raises:
            UnknownConceptError: If either id is not in the graph
        """
        links1 = self.inlinks(w1)
        links2 = self.inlinks(w2)
        size1, size2 = int(links1.size), int(links2.size)

        if size1 == 0 or size2 == 0:
            logger.debug("link_rel(%s, %s): empty inlink set, relatedness 0", w1, w2)
            return 0.0
        if w1 == w2:
            return 1.0

        shared = int(np.intersect1d(links1, links2, assume_unique=True).size)
        if shared == 0:
            return 0.0

        denominator = math.log(self.total_count) - math.log(min(size1, size2))
        if denominator <= 0.0:
            logger.debug("link_rel(%s, %s): undefined denominator, relatedness 0", w1, w2)
            return 0.0

        distance = (math.log(max(size1, size2)) - math.log(shared)) / denominator
        return 1.0 - min(max(distance, 0.0), 1.0)

    def d_rel(self, w: int, concept_ids: Iterable[int]) -> float:
        """
        Document-concept relatedness: the best link_rel between w and any concept
        of a document. An empty document scores 0.

        Args:
            w (int): The query concept
            concept_ids (Iterable[int]): Concepts of the document (N_d ∪ G_d)
        """
        self.require(w)
        best = 0.0
        for other in concept_ids:
            best = max(best, self.link_rel(w, other))
            if best >= 1.0:
                break
        return best


def d_rel(graph: ConceptGraph, w: int, profile) -> float:
    """Document-concept relatedness of w and a DocumentProfile."""
    return graph.d_rel(w, profile.concepts)


def _string_list(record: dict, field: str, line: int) -> list:
    value = record.get(field, [])
    if not isinstance(value, list) or not all(isinstance(item, str) for item in value):
        raise GraphFormatError(f"field {field!r} must be an array of strings", line)
    return value


def parse_graph_lines(lines: Iterable[str]) -> ConceptGraph:
    """
    Parse graph records, one JSON object per line.

    Raises:
        GraphFormatError: On malformed lines (with the line number)
        DuplicateIdError: On repeated ids
        DanglingReferenceError: On inlinks to unknown ids
    """
    concepts = []
    inlinks: Dict[int, list] = {}
    seen_lines: Dict[int, int] = {}

    for number, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as e:
            raise GraphFormatError(f"invalid JSON ({e.msg})", number) from e
        if not isinstance(record, dict):
            raise GraphFormatError("record must be a JSON object", number)

        unknown_fields = set(record) - set(GRAPH_FIELDS)
        if unknown_fields:
            raise GraphFormatError(f"unknown field {sorted(unknown_fields)[0]!r}", number)
        concept_id = record.get("id")
        if not isinstance(concept_id, int) or isinstance(concept_id, bool):
            raise GraphFormatError("field 'id' must be an integer", number)
        title = record.get("title")
        if not isinstance(title, str):
            raise GraphFormatError("field 'title' must be a string", number)
        links = record.get("inlinks", [])
        if not isinstance(links, list) or not all(
            isinstance(item, int) and not isinstance(item, bool) for item in links
        ):
            raise GraphFormatError("field 'inlinks' must be an array of integers", number)
        named_entity = record.get("named_entity", False)
        if not isinstance(named_entity, bool):
            raise GraphFormatError("field 'named_entity' must be a boolean", number)

        if concept_id in seen_lines:
            raise DuplicateIdError(concept_id, number)
        seen_lines[concept_id] = number

        try:
            concept = Concept.create(
                concept_id,
                title,
                redirects=_string_list(record, "redirects", number),
                anchors=_string_list(record, "anchors", number),
                is_named_entity=named_entity,
            )
        except ValueError as e:
            raise GraphFormatError(str(e), number) from e
        concepts.append(concept)
        inlinks[concept_id] = links

    if not concepts:
        raise GraphFormatError("no concepts")
    return ConceptGraph(concepts, inlinks)


def load_graph(path: Union[str, Path]) -> ConceptGraph:
    """
    Load a concept graph file.

    Args:
        path (str | Path): UTF-8 file with one concept record per line

    Returns:
        ConceptGraph: The validated graph
    """
    with open(path, encoding="utf-8") as handle:
        graph = parse_graph_lines(handle)
    logger.info("Loaded %d concepts from %s", graph.total_count, path)
    return graph


def graph_record(graph: ConceptGraph, concept_id: int) -> dict:
    """The line-format record of one concept."""
    concept = graph.concept(concept_id)
    return {
        "id": concept.id,
        "title": concept.title,
        "redirects": sorted(concept.redirects),
        "anchors": sorted(concept.anchors),
        "inlinks": graph.inlinks(concept_id).tolist(),
        "named_entity": concept.is_named_entity,
    }
