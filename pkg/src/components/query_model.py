"""
Query Model Component for Wiki-ES

This module represents Wiki-queries as boolean expression trees over concept
terminals, evaluates them against document profiles, and fuses several
queries into a Wiki-ES rule through fitness-weighted voting.

Key features:
- Immutable, hashable query trees (AND, OR, NOT over concept terminals)
- The concept-evaluator: direct presence, or document relatedness above the
  named-entity (c1) / general-concept (c2) threshold
- Exact-token matching for the bag-of-words baseline
- Weighted voting with the strict 0.5 relevance threshold
- Canonical prefix notation and lossless rule files
- Vectorised evaluation of many queries over a fixed document list

Dependencies:
- numpy: For per-concept match vectors shared across queries
- utils.concept_graph: For relatedness
- utils.config_utils: For SensitivityConfig and Matcher
"""

import json
import math
import re
import threading
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from utils.annotator import DocumentProfile
from utils.concept_graph import ConceptGraph
from utils.config_utils import Matcher, SensitivityConfig
from utils.errors import QueryParseError, RuleFormatError

RELEVANCE_THRESHOLD = 0.5
FITNESS_DIGITS = 12


class Op(str, Enum):
    AND = "AND"
    OR = "OR"
    NOT = "NOT"

    @property
    def arity(self) -> int:
        return 1 if self is Op.NOT else 2


@dataclass(frozen=True)
class Terminal:
    """A concept leaf."""

    concept: int

    @property
    def children(self) -> Tuple["QueryTree", ...]:
        return ()

    @cached_property
    def depth(self) -> int:
        return 0

    @cached_property
    def size(self) -> int:
        return 1

    def __str__(self):
        return format_query(self)


@dataclass(frozen=True)
class Operator:
    """A boolean operator node; AND/OR take two children, NOT one."""

    op: Op
    children: Tuple["QueryTree", ...]

    def __post_init__(self):
        if len(self.children) != self.op.arity:
            raise ValueError(f"{self.op.value} takes {self.op.arity} operand(s), got {len(self.children)}")

    @cached_property
    def depth(self) -> int:
        return 1 + max(child.depth for child in self.children)

    @cached_property
    def size(self) -> int:
        return 1 + sum(child.size for child in self.children)

    def __str__(self):
        return format_query(self)


QueryTree = Union[Terminal, Operator]
Path = Tuple[int, ...]


def term(concept: int) -> Terminal:
    return Terminal(concept)


def and_(left: QueryTree, right: QueryTree) -> Operator:
    return Operator(Op.AND, (left, right))


def or_(left: QueryTree, right: QueryTree) -> Operator:
    return Operator(Op.OR, (left, right))


def not_(child: QueryTree) -> Operator:
    return Operator(Op.NOT, (child,))


def terminals(tree: QueryTree) -> List[int]:
    """Concept ids of all leaves, left to right."""
    if isinstance(tree, Terminal):
        return [tree.concept]
    return [concept for child in tree.children for concept in terminals(child)]


def node_paths(tree: QueryTree, prefix: Path = ()) -> List[Path]:
    """Paths (child-index tuples) of every node in preorder; the root is ()."""
    paths = [prefix]
    for index, child in enumerate(tree.children):
        paths.extend(node_paths(child, prefix + (index,)))
    return paths


def subtree_at(tree: QueryTree, path: Path) -> QueryTree:
    for index in path:
        tree = tree.children[index]
    return tree


def replace_at(tree: QueryTree, path: Path, replacement: QueryTree) -> QueryTree:
    """Return a copy of tree with the subtree at path replaced."""
    if not path:
        return replacement
    head, rest = path[0], path[1:]
    children = list(tree.children)
    children[head] = replace_at(children[head], rest, replacement)
    return Operator(tree.op, tuple(children))


def node_labels(tree: QueryTree) -> List[str]:
    """Primitive of every node in preorder, e.g. ['OR', 'AND', 'w1', ...]."""
    if isinstance(tree, Terminal):
        return [f"w{tree.concept}"]
    return [tree.op.value] + [label for child in tree.children for label in node_labels(child)]


def shape(tree: QueryTree) -> tuple:
    """The arity skeleton of a tree, ignoring which primitive sits at each node."""
    return tuple(shape(child) for child in tree.children)


def validate_tree(tree: QueryTree, max_depth: Optional[int] = None) -> None:
    """
    Check the structural invariants of a query tree.

    Raises:
        ValueError: On an arity violation, an unknown node type or excess depth
    """
    if isinstance(tree, Terminal):
        if not isinstance(tree.concept, int):
            raise ValueError(f"terminal concept must be an int, got {tree.concept!r}")
    elif isinstance(tree, Operator):
        if len(tree.children) != tree.op.arity:
            raise ValueError(f"{tree.op.value} node with {len(tree.children)} children")
        for child in tree.children:
            validate_tree(child)
    else:
        raise ValueError(f"not a query node: {tree!r}")
    if max_depth is not None and tree.depth > max_depth:
        raise ValueError(f"tree depth {tree.depth} exceeds maximum {max_depth}")


def format_query(tree: QueryTree) -> str:
    """Canonical prefix notation, e.g. ``(OR (AND w1 w2) (AND w3 (NOT w4)))``."""
    if isinstance(tree, Terminal):
        return f"w{tree.concept}"
    return "(" + " ".join([tree.op.value] + [format_query(child) for child in tree.children]) + ")"


_QUERY_TOKEN = re.compile(r"\(|\)|[^\s()]+")
_TERMINAL = re.compile(r"w(-?\d+)")


def parse_query(text: str) -> QueryTree:
    """
    Parse the prefix notation produced by format_query.

    Raises:
        QueryParseError: With the character position of the problem
    """
    tokens = [(m.group(0), m.start()) for m in _QUERY_TOKEN.finditer(text)]
    end = len(text)

    def parse(index: int) -> Tuple[QueryTree, int]:
        if index >= len(tokens):
            raise QueryParseError("missing operand", end)
        token, position = tokens[index]
        if token == "(":
            if index + 1 >= len(tokens):
                raise QueryParseError("missing operator", end)
            name, name_position = tokens[index + 1]
            try:
                op = Op(name)
            except ValueError:
                raise QueryParseError(f"unknown operator {name!r}", name_position) from None
            index += 2
            children = []
            for _ in range(op.arity):
                if index < len(tokens) and tokens[index][0] == ")":
                    raise QueryParseError(f"missing operand for {op.value}", tokens[index][1])
                child, index = parse(index)
                children.append(child)
            if index >= len(tokens):
                raise QueryParseError("expected ')'", end)
            if tokens[index][0] != ")":
                raise QueryParseError(f"too many operands for {op.value}", tokens[index][1])
            return Operator(op, tuple(children)), index + 1
        if token == ")":
            raise QueryParseError("unexpected ')'", position)
        match = _TERMINAL.fullmatch(token)
        if match is None:
            if token in Op.__members__:
                raise QueryParseError(f"operator {token} must be parenthesised with its operands", position)
            raise QueryParseError(f"invalid terminal {token!r}", position)
        return Terminal(int(match.group(1))), index + 1

    if not tokens:
        raise QueryParseError("empty query", 0)
    tree, index = parse(0)
    if index != len(tokens):
        raise QueryParseError("unexpected trailing input", tokens[index][1])
    return tree


def eval_concept(graph: ConceptGraph, v: int, profile: DocumentProfile, cfg: SensitivityConfig) -> bool:
    """
    The concept-evaluator δ(v, d).

    A concept present in the profile always matches. Otherwise, with the
    relatedness matcher, it matches when its document relatedness is strictly
    above c1 (named entities) or c2 (general concepts); the exact-token
    matcher requires presence.

    Raises:
        UnknownConceptError: If v is not in the graph
    """
    graph.require(v)
    concepts = profile.concepts
    if v in concepts:
        return True
    if cfg.matcher is Matcher.EXACT_TOKEN:
        return False
    threshold = cfg.c1 if graph.concept(v).is_named_entity else cfg.c2
    return graph.d_rel(v, concepts) > threshold


def eval_query(graph: ConceptGraph, q: QueryTree, profile: DocumentProfile, cfg: SensitivityConfig) -> bool:
    """Evaluate a query tree bottom-up with δ at the leaves."""
    if isinstance(q, Terminal):
        return eval_concept(graph, q.concept, profile, cfg)
    if q.op is Op.AND:
        return eval_query(graph, q.children[0], profile, cfg) and eval_query(graph, q.children[1], profile, cfg)
    if q.op is Op.OR:
        return eval_query(graph, q.children[0], profile, cfg) or eval_query(graph, q.children[1], profile, cfg)
    return not eval_query(graph, q.children[0], profile, cfg)


def round_fitness(value: float) -> float:
    """Normalise a fitness to FITNESS_DIGITS significant digits."""
    return float(f"{value:.{FITNESS_DIGITS}g}")


@dataclass(frozen=True)
class WeightedQuery:
    tree: QueryTree
    fitness: float


@dataclass(frozen=True)
class WikiEsRule:
    """
    A fitness-weighted ensemble of Wiki-queries.

    Fitness values are rounded to 12 significant digits on construction so the
    rule file round-trips bit-exactly. ``labels`` maps terminal ids to titles.
    """

    queries: Tuple[WeightedQuery, ...]
    sensitivity: SensitivityConfig = field(default_factory=SensitivityConfig)
    terminal_set: Tuple[int, ...] = ()
    labels: Mapping[int, str] = field(default_factory=dict, hash=False)

    def __post_init__(self):
        if not self.queries:
            raise RuleFormatError("a rule needs at least one query")
        normalised = []
        for query in self.queries:
            if not 0.0 <= query.fitness <= 1.0 or math.isnan(query.fitness):
                raise RuleFormatError(f"fitness {query.fitness} outside [0, 1]")
            normalised.append(WeightedQuery(query.tree, round_fitness(query.fitness)))
        object.__setattr__(self, "queries", tuple(normalised))
        object.__setattr__(self, "terminal_set", tuple(self.terminal_set))
        object.__setattr__(self, "labels", dict(self.labels))

    @property
    def weights(self) -> List[float]:
        return [query.fitness for query in self.queries]


def weighted_vote(weights: Sequence[float], votes: Sequence[bool]) -> float:
    """Σ F_i b_i / Σ F_i, defined as 0 when all weights are 0."""
    total = math.fsum(weights)
    if total == 0.0:
        return 0.0
    return math.fsum(w for w, b in zip(weights, votes) if b) / total


def vote(rule: WikiEsRule, graph: ConceptGraph, profile: DocumentProfile) -> float:
    """The joint relevance μ of a document under a rule, in [0, 1]."""
    votes = [eval_query(graph, query.tree, profile, rule.sensitivity) for query in rule.queries]
    return weighted_vote(rule.weights, votes)


def classify(rule: WikiEsRule, graph: ConceptGraph, profile: DocumentProfile) -> bool:
    """Relevant iff μ is strictly greater than 0.5."""
    return vote(rule, graph, profile) > RELEVANCE_THRESHOLD


class QueryEvaluator:
    """
    Evaluates many queries over one fixed list of document profiles.

    The δ vector of each concept over the documents is computed once and kept
    as a numpy boolean array; trees are then evaluated with element-wise
    logical operators. Safe to share between threads.
    """

    def __init__(self, graph: ConceptGraph, profiles: Sequence[DocumentProfile], cfg: SensitivityConfig):
        self.graph = graph
        self.profiles = tuple(profiles)
        self.cfg = cfg
        self._vectors: Dict[int, np.ndarray] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self.profiles)

    def concept_vector(self, v: int) -> np.ndarray:
        vector = self._vectors.get(v)
        if vector is None:
            vector = np.fromiter(
                (eval_concept(self.graph, v, profile, self.cfg) for profile in self.profiles),
                dtype=bool,
                count=len(self.profiles),
            )
            vector.flags.writeable = False
            with self._lock:
                vector = self._vectors.setdefault(v, vector)
        return vector

    def evaluate(self, tree: QueryTree) -> np.ndarray:
        """Boolean match vector of a query over the documents."""
        if isinstance(tree, Terminal):
            return self.concept_vector(tree.concept)
        if tree.op is Op.AND:
            return np.logical_and(self.evaluate(tree.children[0]), self.evaluate(tree.children[1]))
        if tree.op is Op.OR:
            return np.logical_or(self.evaluate(tree.children[0]), self.evaluate(tree.children[1]))
        return np.logical_not(self.evaluate(tree.children[0]))

    def votes(self, rule: WikiEsRule) -> np.ndarray:
        """μ of every document under a rule."""
        matrix = np.stack([self.evaluate(query.tree) for query in rule.queries], axis=1)
        weights = rule.weights
        return np.array([weighted_vote(weights, row) for row in matrix], dtype=float)

    def classify(self, rule: WikiEsRule) -> np.ndarray:
        return self.votes(rule) > RELEVANCE_THRESHOLD


def rule_to_dict(rule: WikiEsRule) -> dict:
    return {
        "matcher": rule.sensitivity.matcher.value,
        "c1": rule.sensitivity.c1,
        "c2": rule.sensitivity.c2,
        "terminal_set": list(rule.terminal_set),
        "labels": {str(concept): rule.labels[concept] for concept in sorted(rule.labels)},
        "queries": [
            {"expression": format_query(query.tree), "fitness": query.fitness}
            for query in rule.queries
        ],
    }


def serialize_rule(rule: WikiEsRule) -> str:
    """The canonical rule file text."""
    return json.dumps(rule_to_dict(rule), indent=2, ensure_ascii=False) + "\n"


def parse_rule(text: str) -> WikiEsRule:
    """
    Parse a rule file.

    Raises:
        RuleFormatError: On structural problems
        QueryParseError: On a malformed query expression
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise RuleFormatError(f"invalid JSON ({e.msg} at line {e.lineno})") from e
    if not isinstance(data, dict):
        raise RuleFormatError("rule must be a JSON object")

    try:
        sensitivity = SensitivityConfig(matcher=data["matcher"], c1=data["c1"], c2=data["c2"])
        queries = tuple(
            WeightedQuery(parse_query(item["expression"]), float(item["fitness"]))
            for item in data["queries"]
        )
        labels = {int(key): str(value) for key, value in data.get("labels", {}).items()}
        terminal_set = tuple(int(concept) for concept in data.get("terminal_set", []))
    except KeyError as e:
        raise RuleFormatError(f"missing field {e.args[0]!r}") from e
    except QueryParseError:
        raise
    except (TypeError, ValueError) as e:
        raise RuleFormatError(str(e)) from e
    return WikiEsRule(queries, sensitivity, terminal_set, labels)


def load_rule(path) -> WikiEsRule:
    with open(path, encoding="utf-8") as handle:
        return parse_rule(handle.read())


def save_rule(path, rule: WikiEsRule) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(serialize_rule(rule))
