"""
Bag-of-words document model for the Token-GP baseline.

Tokens are registered as pseudo-concepts so the query machinery runs unchanged:
each pseudo-concept has an empty inlink set (relatedness never fires) and a
stable id derived from the token text, which keeps rule terminals valid across
corpora. Raw text and the titles of pre-annotated concepts go through the same
tokenizer and English stop-word filter, so both record kinds share one
vocabulary.

Dependencies:
- nltk: For the English stop-word list
- hashlib: For stable token ids
"""

import hashlib
from functools import lru_cache
from typing import FrozenSet, Iterable, List, Optional, Sequence, Tuple

import nltk
from nltk.corpus import stopwords

from utils.annotator import CorpusRecord, DocumentProfile, tokenize
from utils.concept_graph import Concept, ConceptGraph
from utils.errors import ConfigError, UnknownConceptError
from utils.log_utils import get_logger

logger = get_logger(__name__)


@lru_cache(maxsize=1)
def stop_words() -> FrozenSet[str]:
    """
    NLTK's English stop words, fetching the corpus on first use if needed.

    Raises:
        ConfigError: If the corpus is missing and cannot be downloaded
    """
    try:
        return frozenset(stopwords.words("english"))
    except LookupError:
        logger.info("Downloading the NLTK stopwords corpus")
        if not nltk.download("stopwords", quiet=True):
            raise ConfigError("NLTK stopwords corpus unavailable; run 'python -m nltk.downloader stopwords'")
        return frozenset(stopwords.words("english"))


def token_id(token: str) -> int:
    """Stable 62-bit id of a token."""
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 2


def content_tokens(text: str) -> List[str]:
    excluded = stop_words()
    return [token for token in tokenize(text) if token not in excluded]


def record_tokens(record: CorpusRecord, graph: Optional[ConceptGraph] = None) -> List[str]:
    """
    Tokens of one corpus record.

    Raises:
        ValueError: If the record is pre-annotated and no graph is given
        UnknownConceptError: If a pre-annotated concept is not in the graph
    """
    if record.text is not None:
        return content_tokens(record.text)
    if graph is None:
        raise ValueError(f"document {record.doc_id!r} is pre-annotated; a concept graph is required")
    tokens = []
    for concept_id in record.concepts:
        if concept_id not in graph:
            raise UnknownConceptError(concept_id, record.doc_id)
        tokens.extend(content_tokens(graph.concept(concept_id).title))
    return tokens


def build_token_index(records: Sequence[CorpusRecord], graph: Optional[ConceptGraph] = None,
                      extra_labels: Iterable[str] = ()) -> Tuple[ConceptGraph, List[DocumentProfile]]:
    """
    Build the pseudo-concept graph and token profiles of a corpus.

    Args:
        records (Sequence[CorpusRecord]): The corpus
        graph (ConceptGraph, optional): Needed to name the concepts of pre-annotated records
        extra_labels (Iterable[str]): Tokens to register even if absent from the corpus
            (terminals of an existing rule)

    Returns:
        tuple: (token graph, one profile per record in corpus order)
    """
    per_record = [record_tokens(record, graph) for record in records]

    vocabulary = {}
    for token in (*extra_labels, *(t for tokens in per_record for t in tokens)):
        vocabulary.setdefault(token, token_id(token))

    concepts = [
        Concept(id=concept_id, title=token, is_named_entity=True)
        for token, concept_id in vocabulary.items()
    ]
    if not concepts:
        # an empty corpus still needs a valid graph
        concepts = [Concept(id=token_id(""), title="<empty>", is_named_entity=True)]
    token_graph = ConceptGraph(concepts, {})

    profiles = [
        DocumentProfile(record.doc_id, frozenset(vocabulary[t] for t in tokens), frozenset())
        for record, tokens in zip(records, per_record)
    ]
    return token_graph, profiles
