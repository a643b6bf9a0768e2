"""Shared fixtures: the 16-concept sample graph, graph builders and small GP configurations."""

import json
from pathlib import Path
from typing import Dict, Iterable, Mapping, Optional

import pytest

from components.gp_engine import TrainingSet
from utils.annotator import DocumentProfile, profile_from_concepts
from utils.concept_graph import Concept, ConceptGraph, load_graph
from utils.config_utils import GpConfig

DATA_DIR = Path(__file__).resolve().parent.parent / "data"
SAMPLE_GRAPH = DATA_DIR / "sample_graph.jsonl"

# sample graph ids
ESPIONAGE, INDUSTRIAL_ESPIONAGE, TRADE_SECRET, CLASSIFIED = 1, 2, 3, 4
LAWSUIT, GOLDMAN, MORGAN, BMW, VOLKSWAGEN = 5, 6, 7, 8, 9
INVESTMENT_BANKING, MORTGAGE, CREDIT, FOOTBALL = 10, 11, 12, 13
AUTOMOTIVE, BANK, COURT = 14, 15, 16


def make_graph(inlinks: Mapping[int, Iterable[int]], total: Optional[int] = None,
               named: Iterable[int] = (), titles: Optional[Dict[int, str]] = None) -> ConceptGraph:
    """
    Graph with concepts 1..total (default: the largest id mentioned) titled "C<id>".

    Concepts without an entry in inlinks get an empty inlink set.
    """
    ids = set(inlinks) | {source for links in inlinks.values() for source in links}
    total = total or max(ids)
    named = set(named)
    titles = titles or {}
    concepts = [
        Concept.create(i, titles.get(i, f"C{i}"), is_named_entity=i in named)
        for i in range(1, total + 1)
    ]
    return ConceptGraph(concepts, inlinks)


def isolated_graph(size: int) -> ConceptGraph:
    """Concepts 1..size with no links, so matching reduces to presence."""
    return make_graph({}, total=size)


def training_set(graph: ConceptGraph, docs) -> TrainingSet:
    """docs: iterable of (concept ids, label)."""
    profiles = [profile_from_concepts(graph, f"d{i}", concepts) for i, (concepts, _) in enumerate(docs)]
    return TrainingSet.from_pairs(profiles, [label for _, label in docs])


def profile(graph: ConceptGraph, *concepts: int, doc_id: str = "d") -> DocumentProfile:
    return profile_from_concepts(graph, doc_id, concepts)


def write_jsonl(path: Path, records) -> Path:
    path.write_text("".join(json.dumps(record) + "\n" for record in records), encoding="utf-8")
    return path


@pytest.fixture(autouse=True)
def debug_checks(monkeypatch):
    """Run the GP loop with tree validation and the elitism assertion."""
    monkeypatch.setenv("WIKIES_DEBUG_CHECKS", "true")


@pytest.fixture(scope="session")
def sample_graph() -> ConceptGraph:
    return load_graph(SAMPLE_GRAPH)


@pytest.fixture
def small_gp() -> GpConfig:
    return GpConfig(
        generations=25,
        subpopulations=4,
        subpopulation_size=20,
        initial_depth=2,
        max_crossover_depth=4,
        terminal_cap=8,
        seed=11,
    )


@pytest.fixture
def substitute_graph() -> ConceptGraph:
    """
    40 general concepts. Concept 1 ("alpha") and concept 2 ("aleph") share
    four of their inlinks (relatedness about 0.903); fillers 3..6, "zeta" 7 and
    "beta" 8 have private inlink sets, so they relate to nothing else.
    """
    inlinks = {
        1: [31, 32, 33, 34, 35],
        2: [31, 32, 33, 34],
        3: [11, 12],
        4: [13, 14],
        5: [15, 16],
        6: [17, 18],
        7: [19, 20],
        8: [21, 22],
    }
    titles = {1: "alpha", 2: "aleph", 3: "gamma", 4: "delta",
              5: "epsilon", 6: "kappa", 7: "zeta", 8: "beta"}
    return make_graph(inlinks, total=40, titles=titles)
