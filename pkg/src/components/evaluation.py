"""
Evaluation Component for Wiki-ES

This module scores learned rules against labeled corpora and compares models.

Key features:
- Confusion counts and F-score, precision, recall, accuracy
- Guarded 0/0 convention: undefined precision or recall is reported as 0
- Macro-averaging of per-topic reports
- Rule complexity: mean query size and deepest query
- Pairwise relative F-score differences, 100 * (F_a - F_b) / F_b
- Structured (dict) and aligned plain-text renderings

Dependencies:
- numpy: For vectorised classification through QueryEvaluator
- components.query_model: For rule evaluation
"""

from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from components.query_model import QueryEvaluator, WikiEsRule
from utils.annotator import DocumentProfile
from utils.concept_graph import ConceptGraph
from utils.errors import EvaluationError


@dataclass(frozen=True)
class MetricsReport:
    f_score: float
    precision: float
    recall: float
    accuracy: float
    true_positives: int
    false_positives: int
    false_negatives: int
    true_negatives: int

    def to_dict(self) -> dict:
        return asdict(self)


def metrics_from_counts(tp: int, fp: int, fn: int, tn: int) -> MetricsReport:
    """Derive the four metrics from confusion counts."""
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f = 2.0 * precision * recall / (precision + recall) if precision + recall else 0.0
    total = tp + fp + fn + tn
    accuracy = (tp + tn) / total if total else 0.0
    return MetricsReport(f, precision, recall, accuracy, tp, fp, fn, tn)


def report_from_predictions(predicted: np.ndarray, labels: np.ndarray) -> MetricsReport:
    predicted = np.asarray(predicted, dtype=bool)
    labels = np.asarray(labels, dtype=bool)
    return metrics_from_counts(
        int(np.count_nonzero(predicted & labels)),
        int(np.count_nonzero(predicted & ~labels)),
        int(np.count_nonzero(~predicted & labels)),
        int(np.count_nonzero(~predicted & ~labels)),
    )


def score(rule: WikiEsRule, corpus: Sequence[Tuple[DocumentProfile, Optional[int]]],
          graph: ConceptGraph) -> MetricsReport:
    """
    Classify every document of a labeled corpus with a rule.

    Args:
        rule (WikiEsRule): The rule to evaluate
        corpus (Sequence[tuple]): (profile, relevance) pairs
        graph (ConceptGraph): Graph the profiles were built against

    Returns:
        MetricsReport: Counts and metrics

    Raises:
        EvaluationError: If the corpus is empty or a document has no label
    """
    if not corpus:
        raise EvaluationError("cannot score an empty corpus")
    for profile, label in corpus:
        if label is None:
            raise EvaluationError(f"missing relevance label for document {profile.doc_id!r}")
    evaluator = QueryEvaluator(graph, [profile for profile, _ in corpus], rule.sensitivity)
    labels = np.array([label == 1 for _, label in corpus], dtype=bool)
    return report_from_predictions(evaluator.classify(rule), labels)


def macro_average(reports: Sequence[MetricsReport]) -> MetricsReport:
    """Mean of each metric across reports; counts are summed."""
    if not reports:
        raise EvaluationError("no reports to average")
    return MetricsReport(
        f_score=float(np.mean([r.f_score for r in reports])),
        precision=float(np.mean([r.precision for r in reports])),
        recall=float(np.mean([r.recall for r in reports])),
        accuracy=float(np.mean([r.accuracy for r in reports])),
        true_positives=sum(r.true_positives for r in reports),
        false_positives=sum(r.false_positives for r in reports),
        false_negatives=sum(r.false_negatives for r in reports),
        true_negatives=sum(r.true_negatives for r in reports),
    )


@dataclass(frozen=True)
class RuleComplexity:
    """Size of a rule's query trees: mean node count and the deepest tree."""

    mean_size: float
    max_depth: float

    def to_dict(self) -> dict:
        return asdict(self)


def rule_complexity(rule: WikiEsRule) -> RuleComplexity:
    sizes = [wq.tree.size for wq in rule.queries]
    return RuleComplexity(float(np.mean(sizes)), float(max(wq.tree.depth for wq in rule.queries)))


def mean_complexity(values: Sequence[RuleComplexity]) -> RuleComplexity:
    """Per-field mean across rules (topics)."""
    if not values:
        raise EvaluationError("no rules to average")
    return RuleComplexity(
        mean_size=float(np.mean([v.mean_size for v in values])),
        max_depth=float(np.mean([v.max_depth for v in values])),
    )


def relative_difference(f_a: float, f_b: float) -> Optional[float]:
    """100 * (F_a - F_b) / F_b, or None when F_b is 0."""
    if f_b == 0.0:
        return None
    return 100.0 * (f_a - f_b) / f_b


@dataclass(frozen=True)
class ComparisonMatrix:
    """cells[i][j] compares model i against model j."""

    names: Tuple[str, ...]
    f_scores: Tuple[float, ...]
    cells: Tuple[Tuple[Optional[float], ...], ...]

    def cell(self, row: str, column: str) -> Optional[float]:
        return self.cells[self.names.index(row)][self.names.index(column)]

    def to_dict(self) -> dict:
        return {
            "models": list(self.names),
            "f_scores": list(self.f_scores),
            "relative_difference_percent": {
                row: {column: self.cells[i][j] for j, column in enumerate(self.names)}
                for i, row in enumerate(self.names)
            },
        }

    def format_table(self) -> str:
        """Aligned plain-text matrix; undefined cells print as 'undefined'."""
        header = [""] + list(self.names)
        rows = [header]
        for name, cells in zip(self.names, self.cells):
            rows.append([name] + ["undefined" if c is None else f"{c:+.2f}%" for c in cells])
        widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
        lines = ["  ".join(value.rjust(width) for value, width in zip(row, widths)) for row in rows]
        return "\n".join(lines)


def compare(reports: Sequence[Tuple[str, MetricsReport]]) -> ComparisonMatrix:
    """
    Pairwise relative F-score differences between named reports.

    Raises:
        EvaluationError: With fewer than two reports
    """
    if len(reports) < 2:
        raise EvaluationError("need ≥2 rules to compare")
    names = tuple(name for name, _ in reports)
    f_scores = tuple(report.f_score for _, report in reports)
    cells = tuple(
        tuple(relative_difference(f_a, f_b) for f_b in f_scores)
        for f_a in f_scores
    )
    return ComparisonMatrix(names, f_scores, cells)


def format_report(report: MetricsReport, title: Optional[str] = None) -> str:
    """Aligned plain-text rendering of one report."""
    rows: List[Tuple[str, str]] = [
        ("F-score", f"{report.f_score:.4f}"),
        ("Precision", f"{report.precision:.4f}"),
        ("Recall", f"{report.recall:.4f}"),
        ("Accuracy", f"{report.accuracy:.4f}"),
        ("TP / FP", f"{report.true_positives} / {report.false_positives}"),
        ("FN / TN", f"{report.false_negatives} / {report.true_negatives}"),
    ]
    width = max(len(name) for name, _ in rows)
    lines = [title] if title else []
    lines.extend(f"{name.ljust(width)}  {value}" for name, value in rows)
    return "\n".join(lines)


def reports_table(reports: Dict[str, MetricsReport]) -> str:
    """One line per named report: F, P, R, Acc."""
    rows = [["model", "F-score", "Precision", "Recall", "Accuracy"]]
    for name, r in reports.items():
        rows.append([name, f"{r.f_score:.4f}", f"{r.precision:.4f}", f"{r.recall:.4f}", f"{r.accuracy:.4f}"])
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    return "\n".join(
        "  ".join(value.ljust(w) if i == 0 else value.rjust(w) for i, (value, w) in enumerate(zip(row, widths)))
        for row in rows
    )
