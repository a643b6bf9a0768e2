"""
Experiment Component for Wiki-ES

This module wires the document models, the genetic program and the scorer into
end-to-end runs: learning a rule under either matcher, re-deriving the document
model a stored rule expects, and the multi-topic comparison of Wiki-ES against
the bag-of-words Token-GP baseline.

Key features:
- One learning pipeline for both matchers (concept profiles or token profiles)
- Document models rebuilt from a stored rule (token rules carry their vocabulary)
- Per-topic training and held-out scoring driven by qrels
- Macro-averaged reports and the pairwise comparison matrix
- Query complexity of the learned rules per model
- CSV per-topic breakdown for external plotting

Dependencies:
- csv: For the per-topic breakdown file
- components.gp_engine: For rule learning
- components.evaluation: For scoring and comparison
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from components.evaluation import (
    ComparisonMatrix, MetricsReport, RuleComplexity, compare, macro_average, mean_complexity, rule_complexity,
    score,
)
from components.gp_engine import EvolutionResult, GpEngine, TrainingSet
from components.query_model import WikiEsRule
from utils.annotator import CorpusRecord, DocumentProfile, profiles_from_records, relevance_labels
from utils.concept_graph import ConceptGraph
from utils.config_utils import GpConfig, Matcher, SensitivityConfig
from utils.errors import DegenerateTrainingSetError, EvaluationError, NoCandidateTerminalsError
from utils.log_utils import get_logger
from utils.token_index import build_token_index

logger = get_logger(__name__)

WIKI_MODEL = "Wiki-ES"
TOKEN_MODEL = "Token-GP"

BREAKDOWN_COLUMNS = (
    "topic", "model", "f_score", "precision", "recall", "accuracy",
    "f_diff", "precision_diff", "recall_diff", "mean_query_size", "max_query_depth",
)


def document_model(records: Sequence[CorpusRecord], graph: ConceptGraph, matcher: Matcher,
                   rule: Optional[WikiEsRule] = None) -> Tuple[ConceptGraph, List[DocumentProfile]]:
    """
    Build the graph and profiles a matcher evaluates against.

    Args:
        records (Sequence[CorpusRecord]): The corpus
        graph (ConceptGraph): The concept graph
        matcher (Matcher): WIKI_RELATEDNESS uses concept profiles over the graph;
            EXACT_TOKEN uses token profiles over a pseudo-concept graph
        rule (WikiEsRule, optional): A learned token rule whose terminals must stay
            resolvable on a new corpus

    Returns:
        tuple: (evaluation graph, one profile per record)
    """
    if matcher is Matcher.EXACT_TOKEN:
        extra = rule.labels.values() if rule is not None else ()
        return build_token_index(records, graph, extra_labels=extra)
    return graph, profiles_from_records(records, graph)


def learn_rule(records: Sequence[CorpusRecord], labels: Sequence[int], graph: ConceptGraph,
               gp: GpConfig, sens: SensitivityConfig,
               threads: Optional[int] = None) -> Tuple[EvolutionResult, MetricsReport]:
    """
    Learn a rule under the configured matcher and score it on its training set.

    Returns:
        tuple: (EvolutionResult, training MetricsReport)

    Raises:
        DegenerateTrainingSetError: If relevant or irrelevant examples are missing
        NoCandidateTerminalsError: If the relevant documents carry no concepts
    """
    model_graph, profiles = document_model(records, graph, sens.matcher)
    training = TrainingSet.from_pairs(profiles, labels)
    result = GpEngine(training, model_graph, gp, sens, threads=threads).run()
    report = score(result.rule, list(zip(profiles, labels)), model_graph)
    return result, report


def score_records(rule: WikiEsRule, records: Sequence[CorpusRecord], labels: Sequence[Optional[int]],
                  graph: ConceptGraph) -> MetricsReport:
    """Score a rule on a corpus, building whichever document model the rule expects."""
    model_graph, profiles = document_model(records, graph, rule.sensitivity.matcher, rule)
    return score(rule, list(zip(profiles, labels)), model_graph)


@dataclass
class TopicResult:
    topic: str
    reports: Dict[str, MetricsReport]
    rules: Dict[str, WikiEsRule] = field(default_factory=dict, repr=False)

    @property
    def complexity(self) -> Dict[str, RuleComplexity]:
        return {name: rule_complexity(rule) for name, rule in self.rules.items()}


@dataclass
class ExperimentResult:
    """
    Per-topic reports, their macro averages and the comparison of the averages.

    complexity holds, per model, the mean over topics of each learned rule's
    mean query size and deepest query.
    """

    topics: List[TopicResult]
    averages: Dict[str, MetricsReport]
    comparison: ComparisonMatrix
    skipped: List[str] = field(default_factory=list)
    complexity: Dict[str, RuleComplexity] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "topics": [
                {
                    "topic": t.topic,
                    "reports": {name: r.to_dict() for name, r in t.reports.items()},
                    "complexity": {name: c.to_dict() for name, c in t.complexity.items()},
                }
                for t in self.topics
            ],
            "averages": {name: r.to_dict() for name, r in self.averages.items()},
            "complexity": {name: c.to_dict() for name, c in self.complexity.items()},
            "comparison": self.comparison.to_dict(),
            "skipped": list(self.skipped),
        }


def run_experiment(graph: ConceptGraph, train_records: Sequence[CorpusRecord],
                   test_records: Sequence[CorpusRecord], qrels: Mapping[str, Mapping[str, int]],
                   topics: Optional[Sequence[str]] = None, gp: Optional[GpConfig] = None,
                   sens: Optional[SensitivityConfig] = None,
                   threads: Optional[int] = None) -> ExperimentResult:
    """
    Train and score Wiki-ES and Token-GP rules for every topic.

    Documents a topic's qrels do not judge count as irrelevant for that topic;
    the corpus files' own relevance fields play no part.
    Both models of a topic are learned with the same GP configuration and seed.

    Args:
        graph (ConceptGraph): The concept graph
        train_records (Sequence[CorpusRecord]): Training corpus
        test_records (Sequence[CorpusRecord]): Held-out corpus
        qrels (Mapping): topic -> {doc_id: 0|1}
        topics (Sequence[str], optional): Topics to run; defaults to all qrels topics
        gp (GpConfig, optional): GP parameters
        sens (SensitivityConfig, optional): Thresholds for the Wiki-ES model
        threads (int, optional): Worker cap

    Returns:
        ExperimentResult: Reports per topic, macro averages and comparison

    Raises:
        EvaluationError: If no topic could be trained
    """
    gp = gp or GpConfig()
    sens = sens or SensitivityConfig()
    wiki_sens = sens.model_copy(update={"matcher": Matcher.WIKI_RELATEDNESS})
    token_sens = sens.model_copy(update={"matcher": Matcher.EXACT_TOKEN})
    topics = list(topics) if topics is not None else sorted(qrels)

    results, skipped = [], []
    for topic in topics:
        judgments = qrels.get(topic, {})
        train_labels = relevance_labels(train_records, judgments, default=0, inline=False)
        test_labels = relevance_labels(test_records, judgments, default=0, inline=False)
        logger.info("Topic %s: %d/%d relevant training documents",
                    topic, sum(train_labels), len(train_labels))

        reports, rules = {}, {}
        try:
            for name, model_sens in ((WIKI_MODEL, wiki_sens), (TOKEN_MODEL, token_sens)):
                result, _ = learn_rule(train_records, train_labels, graph, gp, model_sens, threads)
                rules[name] = result.rule
                reports[name] = score_records(result.rule, test_records, test_labels, graph)
        except (DegenerateTrainingSetError, NoCandidateTerminalsError) as e:
            logger.warning("Skipping topic %s: %s", topic, e)
            skipped.append(topic)
            continue
        results.append(TopicResult(topic, reports, rules))

    if not results:
        raise EvaluationError("no topic could be trained")

    averages = {
        name: macro_average([t.reports[name] for t in results])
        for name in (WIKI_MODEL, TOKEN_MODEL)
    }
    comparison = compare(list(averages.items()))
    complexity = {
        name: mean_complexity([t.complexity[name] for t in results])
        for name in (WIKI_MODEL, TOKEN_MODEL)
    }
    return ExperimentResult(results, averages, comparison, skipped, complexity)


def write_topic_breakdown(path: Union[str, Path], result: ExperimentResult) -> None:
    """
    Write one CSV row per (topic, model).

    The difference columns hold Wiki-ES minus Token-GP and are left empty on the
    Token-GP rows. The last two columns describe the learned rule: its mean
    query size and its deepest query.
    """
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(BREAKDOWN_COLUMNS)
        for topic in result.topics:
            wiki, token = topic.reports[WIKI_MODEL], topic.reports[TOKEN_MODEL]
            complexity = topic.complexity
            diffs = (
                f"{wiki.f_score - token.f_score:.6f}",
                f"{wiki.precision - token.precision:.6f}",
                f"{wiki.recall - token.recall:.6f}",
            )
            for name, report in ((WIKI_MODEL, wiki), (TOKEN_MODEL, token)):
                size = depth = ""
                if name in complexity:
                    size = f"{complexity[name].mean_size:.4f}"
                    depth = f"{complexity[name].max_depth:g}"
                writer.writerow((
                    topic.topic, name,
                    f"{report.f_score:.6f}", f"{report.precision:.6f}",
                    f"{report.recall:.6f}", f"{report.accuracy:.6f}",
                    *(diffs if name == WIKI_MODEL else ("", "", "")),
                    size, depth,
                ))
    logger.info("Wrote per-topic breakdown for %d topics to %s", len(result.topics), path)
