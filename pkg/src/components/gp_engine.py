"""
Genetic Programming Engine for Wiki-ES

This module implements the co-evolutionary genetic program that learns a
Wiki-ES rule from relevance-labeled example documents. M islands of n query
trees evolve side by side; parents occasionally come from a foreign island
(probability 1/M), offspring replace parents elitistically, and the best query
of every island joins the final rule weighted by its training F-score.

Key features:
- Terminal selection by document frequency among relevant examples
- Random tree initialisation with uniformly drawn target depth
- F-score fitness with a per-run cache keyed by canonical tree text
- Binary tournaments with parsimony tie-breaking
- Depth-limited subtree crossover and arity-preserving point mutation
- Island evolution on a thread pool with one RNG stream per island, so results
  do not depend on the number of threads
- Grid calibration of the acceptance thresholds c1 and c2

Dependencies:
- numpy: For random streams (SeedSequence per island) and match vectors
- concurrent.futures: For island-parallel generations
- components.query_model: For trees, evaluation and rules
"""

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from components.query_model import (
    Op,
    Operator,
    QueryEvaluator,
    QueryTree,
    Terminal,
    WeightedQuery,
    WikiEsRule,
    format_query,
    node_paths,
    replace_at,
    subtree_at,
    validate_tree,
)
from utils.annotator import DocumentProfile
from utils.concept_graph import ConceptGraph
from utils.config_utils import GpConfig, Matcher, SensitivityConfig, debug_checks_enabled, resolve_threads
from utils.errors import ConfigError, DegenerateTrainingSetError, NoCandidateTerminalsError
from utils.log_utils import get_logger

logger = get_logger(__name__)

OPERATORS = (Op.AND, Op.OR, Op.NOT)
BINARY_OPERATORS = (Op.AND, Op.OR)
CROSSOVER_RETRIES = 10
LOG_EVERY = 10

DEFAULT_C1_GRID = (0.90, 0.95, 0.99)
DEFAULT_C2_GRID = (0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


@dataclass(frozen=True)
class TrainingSet:
    """Relevance-labeled example documents D_t with r(d) in {0, 1}."""

    items: Tuple[Tuple[DocumentProfile, int], ...]

    @classmethod
    def from_pairs(cls, profiles: Sequence[DocumentProfile], labels: Sequence[int]) -> "TrainingSet":
        if len(profiles) != len(labels):
            raise ValueError("profiles and labels differ in length")
        return cls(tuple((profile, int(label)) for profile, label in zip(profiles, labels)))

    @property
    def profiles(self) -> Tuple[DocumentProfile, ...]:
        return tuple(profile for profile, _ in self.items)

    @property
    def labels(self) -> np.ndarray:
        return np.fromiter((label == 1 for _, label in self.items), dtype=bool, count=len(self.items))

    def validate(self) -> None:
        """
        Raises:
            DegenerateTrainingSetError: If there is no relevant or no irrelevant item
        """
        labels = self.labels
        if not labels.any() or labels.all():
            raise DegenerateTrainingSetError(
                "degenerate training set: need at least one relevant and one irrelevant document"
            )


class Member(NamedTuple):
    tree: QueryTree
    fitness: float


@dataclass
class Subpopulation:
    """One island: n query trees with their cached fitness."""

    index: int
    members: List[Member]

    def best(self) -> Member:
        """Highest fitness; fewer nodes, then earlier position, break ties."""
        position = min(
            range(len(self.members)),
            key=lambda i: (-self.members[i].fitness, self.members[i].tree.size, i),
        )
        return self.members[position]


@dataclass
class EvolutionResult:
    rule: WikiEsRule
    # history[g][i]: best fitness of island i after generation g (0 = initial population)
    history: List[List[float]] = field(default_factory=list)


def select_terminals(training: TrainingSet, k: int) -> List[int]:
    """
    The terminal set W0: up to k concepts ranked by document frequency among the
    relevant training documents, smaller id first on ties.

    Raises:
        NoCandidateTerminalsError: If the relevant documents contain no concepts
    """
    if k < 1:
        raise ValueError("terminal cap must be at least 1")
    frequency: Dict[int, int] = {}
    for profile, label in training.items:
        if label == 1:
            for concept in profile.concepts:
                frequency[concept] = frequency.get(concept, 0) + 1
    if not frequency:
        raise NoCandidateTerminalsError()
    ranked = sorted(frequency, key=lambda concept: (-frequency[concept], concept))
    return ranked[:k]


def init_individual(terminal_set: Sequence[int], d_max: int, rng: np.random.Generator) -> QueryTree:
    """
    Grow a random tree.

    A target depth d is drawn uniformly from 1..d_max; operators are drawn
    uniformly from AND, OR, NOT down to depth d - 1 and every leaf is a
    uniformly drawn terminal at depth d, so the tree depth is exactly d.
    """
    if not terminal_set:
        raise NoCandidateTerminalsError()
    depth = int(rng.integers(1, d_max + 1))

    def grow(level: int) -> QueryTree:
        if level == depth:
            return Terminal(int(terminal_set[rng.integers(len(terminal_set))]))
        op = OPERATORS[rng.integers(len(OPERATORS))]
        return Operator(op, tuple(grow(level + 1) for _ in range(op.arity)))

    return grow(0)


def f_score(matches: np.ndarray, labels: np.ndarray) -> float:
    """F-score of a match vector against relevance labels; 0 when nothing relevant is retrieved."""
    true_positives = int(np.count_nonzero(matches & labels))
    if true_positives == 0:
        return 0.0
    precision = true_positives / int(np.count_nonzero(matches))
    recall = true_positives / int(np.count_nonzero(labels))
    return 2.0 * precision * recall / (precision + recall)


def fitness(q: QueryTree, training: TrainingSet, graph: ConceptGraph, cfg: SensitivityConfig) -> float:
    """Training F-score of a single query."""
    evaluator = QueryEvaluator(graph, training.profiles, cfg)
    return f_score(evaluator.evaluate(q), training.labels)


class FitnessFunction:
    """Cached fitness over one training set; shared by all islands of a run."""

    def __init__(self, training: TrainingSet, graph: ConceptGraph, cfg: SensitivityConfig):
        self.evaluator = QueryEvaluator(graph, training.profiles, cfg)
        self.labels = training.labels
        self._cache: Dict[str, float] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._cache)

    def __call__(self, tree: QueryTree) -> float:
        key = format_query(tree)
        value = self._cache.get(key)
        if value is None:
            value = f_score(self.evaluator.evaluate(tree), self.labels)
            with self._lock:
                self._cache[key] = value
        return value


def tournament(pool: Sequence[Member], rng: np.random.Generator) -> Member:
    """
    Binary tournament: the fitter of two distinct random members wins; equal
    fitness goes to the smaller tree, then to a coin flip.
    """
    if len(pool) == 1:
        return pool[0]
    i, j = rng.choice(len(pool), size=2, replace=False)
    first, second = pool[int(i)], pool[int(j)]
    if first.fitness != second.fitness:
        return first if first.fitness > second.fitness else second
    if first.tree.size != second.tree.size:
        return first if first.tree.size < second.tree.size else second
    return first if rng.random() < 0.5 else second


def crossover(p1: QueryTree, p2: QueryTree, rng: np.random.Generator,
              max_depth: int) -> Tuple[QueryTree, QueryTree]:
    """
    Subtree crossover: swap the subtrees rooted at one uniformly drawn node of
    each parent. Points are redrawn up to CROSSOVER_RETRIES times while an
    offspring would exceed max_depth; after that the parents are returned.
    """
    paths1, paths2 = node_paths(p1), node_paths(p2)
    for _ in range(1 + CROSSOVER_RETRIES):
        point1 = paths1[rng.integers(len(paths1))]
        point2 = paths2[rng.integers(len(paths2))]
        child1 = replace_at(p1, point1, subtree_at(p2, point2))
        child2 = replace_at(p2, point2, subtree_at(p1, point1))
        if child1.depth <= max_depth and child2.depth <= max_depth:
            return child1, child2
    logger.debug("crossover fell back to parent copies (max depth %d)", max_depth)
    return p1, p2


def mutate(q: QueryTree, cfg: GpConfig, rng: np.random.Generator, terminal_set: Sequence[int]) -> QueryTree:
    """
    Point mutation, applied to the whole tree with probability p_m.

    Each node is then replaced, with probability per_node_mutation_rate, by a
    random primitive of the same arity: terminals by members of the terminal
    set, AND/OR by AND or OR. NOT is the only unary primitive and stays. The
    tree shape never changes.
    """
    if rng.random() >= cfg.mutation_prob:
        return q
    rate = cfg.per_node_mutation_rate

    def visit(node: QueryTree) -> QueryTree:
        if isinstance(node, Terminal):
            if rng.random() < rate:
                return Terminal(int(terminal_set[rng.integers(len(terminal_set))]))
            return node
        children = tuple(visit(child) for child in node.children)
        op = node.op
        if op is not Op.NOT and rng.random() < rate:
            op = BINARY_OPERATORS[rng.integers(len(BINARY_OPERATORS))]
        if op is node.op and children == node.children:
            return node
        return Operator(op, children)

    return visit(q)


class GpEngine:
    """
    Runs the island-model genetic program for one training set.

    Every generation, each island breeds n offspring from its own members and,
    for the second parent with probability 1/M, from a uniformly chosen other
    island. Migration reads the state of the other islands at the start of the
    generation. Offspring and parents are pooled and the n best survive.
    """

    def __init__(self, training: TrainingSet, graph: ConceptGraph, config: GpConfig,
                 sensitivity: SensitivityConfig, threads: Optional[int] = None,
                 debug_checks: Optional[bool] = None):
        training.validate()
        self.training = training
        self.graph = graph
        self.config = config
        self.sensitivity = sensitivity
        self.threads = resolve_threads(threads)
        self.debug_checks = debug_checks_enabled() if debug_checks is None else debug_checks
        self.terminal_set = select_terminals(training, config.terminal_cap)
        self.fitness = FitnessFunction(training, graph, sensitivity)

    def _member(self, tree: QueryTree) -> Member:
        if self.debug_checks:
            validate_tree(tree, self.config.max_crossover_depth)
        return Member(tree, self.fitness(tree))

    def _initial_island(self, index: int, rng: np.random.Generator) -> Subpopulation:
        trees = [
            init_individual(self.terminal_set, self.config.initial_depth, rng)
            for _ in range(self.config.subpopulation_size)
        ]
        return Subpopulation(index, [self._member(tree) for tree in trees])

    def _breed(self, island: int, snapshot: Sequence[Sequence[Member]],
               rng: np.random.Generator) -> Subpopulation:
        cfg = self.config
        islands = len(snapshot)
        own = snapshot[island]
        offspring: List[QueryTree] = []

        while len(offspring) < cfg.subpopulation_size:
            first = tournament(own, rng)
            pool = own
            if islands > 1 and rng.random() < 1.0 / islands:
                other = int(rng.integers(islands - 1))
                if other >= island:
                    other += 1
                pool = snapshot[other]
            second = tournament(pool, rng)

            if rng.random() < cfg.crossover_prob:
                child1, child2 = crossover(first.tree, second.tree, rng, cfg.max_crossover_depth)
            else:
                child1, child2 = first.tree, second.tree
            offspring.append(mutate(child1, cfg, rng, self.terminal_set))
            offspring.append(mutate(child2, cfg, rng, self.terminal_set))

        pool = list(own) + [self._member(tree) for tree in offspring]
        # stable sort keeps parents ahead of equally fit, equally sized offspring
        pool.sort(key=lambda member: (-member.fitness, member.tree.size))
        return Subpopulation(island, pool[:cfg.subpopulation_size])

    def run(self) -> EvolutionResult:
        cfg = self.config
        seed = cfg.resolved_seed()
        streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(cfg.subpopulations)]
        logger.info(
            "Evolving %d islands of %d for %d generations over %d terminals (seed %d, %d threads)",
            cfg.subpopulations, cfg.subpopulation_size, cfg.generations,
            len(self.terminal_set), seed, self.threads,
        )

        islands = [self._initial_island(i, rng) for i, rng in enumerate(streams)]
        history = [[island.best().fitness for island in islands]]

        with ThreadPoolExecutor(max_workers=min(self.threads, cfg.subpopulations)) as executor:
            for generation in range(1, cfg.generations + 1):
                snapshot = tuple(tuple(island.members) for island in islands)
                futures = [
                    executor.submit(self._breed, i, snapshot, streams[i])
                    for i in range(cfg.subpopulations)
                ]
                islands = [future.result() for future in futures]
                best = [island.best().fitness for island in islands]
                if self.debug_checks:
                    for i, (before, after) in enumerate(zip(history[-1], best)):
                        if after < before:
                            raise AssertionError(
                                f"island {i} lost its elite in generation {generation}: {before} -> {after}"
                            )
                history.append(best)
                if generation % LOG_EVERY == 0 or generation == cfg.generations:
                    logger.info("generation %d: best fitness %s (%d cached trees)",
                                generation, " ".join(f"{b:.4f}" for b in best), len(self.fitness))

        elites = [island.best() for island in islands]
        labels = {concept: self.graph.concept(concept).title for concept in self.terminal_set}
        rule = WikiEsRule(
            tuple(WeightedQuery(elite.tree, elite.fitness) for elite in elites),
            self.sensitivity,
            tuple(self.terminal_set),
            labels,
        )
        return EvolutionResult(rule, history)


def evolve(training: TrainingSet, graph: ConceptGraph, cfg: GpConfig, sens: SensitivityConfig,
           threads: Optional[int] = None) -> WikiEsRule:
    """
    Learn a Wiki-ES rule with M queries, one elite per island.

    Raises:
        DegenerateTrainingSetError: If relevant or irrelevant examples are missing
        NoCandidateTerminalsError: If no terminal can be selected
    """
    return GpEngine(training, graph, cfg, sens, threads=threads).run().rule


def calibrate_thresholds(training: TrainingSet, graph: ConceptGraph,
                         grid: Optional[Tuple[Sequence[float], Sequence[float]]] = None,
                         terminal_cap: int = 15) -> SensitivityConfig:
    """
    Grid-search the acceptance thresholds.

    Every (c1, c2) pair is scored by the mean training F-score of the
    single-concept queries over the terminal set; the best pair wins and ties
    go to the larger (stricter) thresholds.

    Args:
        training (TrainingSet): Labeled examples
        graph (ConceptGraph): The concept graph
        grid (tuple, optional): (c1 values, c2 values); defaults to DEFAULT_C1_GRID x DEFAULT_C2_GRID
        terminal_cap (int): Size of the terminal set

    Returns:
        SensitivityConfig: The chosen thresholds with the relatedness matcher
    """
    training.validate()
    c1_values, c2_values = grid or (DEFAULT_C1_GRID, DEFAULT_C2_GRID)
    if not c1_values or not c2_values:
        raise ConfigError("threshold grid must not be empty")
    terminal_set = select_terminals(training, terminal_cap)
    profiles = training.profiles
    labels = training.labels

    # relatedness does not depend on the thresholds: compute it once per terminal
    present, relatedness, named = {}, {}, {}
    for concept in terminal_set:
        present[concept] = np.array([concept in p.concepts for p in profiles], dtype=bool)
        relatedness[concept] = np.array([graph.d_rel(concept, p.concepts) for p in profiles], dtype=float)
        named[concept] = graph.concept(concept).is_named_entity

    best_key, best = None, None
    for c1 in c1_values:
        for c2 in c2_values:
            scores = []
            for concept in terminal_set:
                threshold = c1 if named[concept] else c2
                matches = present[concept] | (relatedness[concept] > threshold)
                scores.append(f_score(matches, labels))
            key = (round(float(np.mean(scores)), 12), c1, c2)
            logger.debug("calibration c1=%.2f c2=%.2f mean F %.6f", c1, c2, key[0])
            if best_key is None or key > best_key:
                best_key = key
                best = SensitivityConfig(c1=c1, c2=c2, matcher=Matcher.WIKI_RELATEDNESS)
    logger.info("Calibrated thresholds c1=%s c2=%s (mean F %.4f)", best.c1, best.c2, best_key[0])
    return best
