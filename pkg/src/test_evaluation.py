"""Tests for scoring, comparison and the Wiki-ES versus Token-GP experiment."""

import csv

import numpy as np
import pytest

from components.evaluation import (
    RuleComplexity, compare, format_report, macro_average, mean_complexity, metrics_from_counts,
    relative_difference, report_from_predictions, rule_complexity, score,
)
from components.experiment import (
    BREAKDOWN_COLUMNS, TOKEN_MODEL, WIKI_MODEL, ExperimentResult, TopicResult, learn_rule, run_experiment,
    score_records, write_topic_breakdown,
)
from components.query_model import WeightedQuery, WikiEsRule, and_, not_, or_, term
from conftest import isolated_graph, profile
from utils.annotator import CorpusRecord
from utils.config_utils import Matcher, SensitivityConfig
from utils.errors import EvaluationError


def test_metrics_from_counts():
    report = metrics_from_counts(tp=2, fp=1, fn=2, tn=5)
    assert report.precision == pytest.approx(2 / 3)
    assert report.recall == pytest.approx(0.5)
    assert report.f_score == pytest.approx(4 / 7)
    assert report.accuracy == pytest.approx(0.7)


def test_undefined_precision_is_zero():
    report = metrics_from_counts(tp=0, fp=0, fn=3, tn=7)
    assert (report.precision, report.recall, report.f_score) == (0.0, 0.0, 0.0)
    assert report.accuracy == pytest.approx(0.7)


def test_report_from_predictions():
    report = report_from_predictions([1, 1, 0, 0], [1, 0, 1, 0])
    assert (report.true_positives, report.false_positives, report.false_negatives, report.true_negatives) == (1, 1, 1, 1)


def test_score_requires_labels_and_documents():
    graph = isolated_graph(2)
    rule = WikiEsRule((WeightedQuery(term(1), 1.0),))
    with pytest.raises(EvaluationError):
        score(rule, [], graph)
    with pytest.raises(EvaluationError):
        score(rule, [(profile(graph, 1), None)], graph)
    report = score(rule, [(profile(graph, 1), 1), (profile(graph, 2), 0)], graph)
    assert report.f_score == 1.0


def test_macro_average():
    reports = [metrics_from_counts(1, 0, 0, 1), metrics_from_counts(0, 1, 1, 0)]
    average = macro_average(reports)
    assert average.f_score == pytest.approx(0.5)
    assert average.true_positives == 1
    with pytest.raises(EvaluationError):
        macro_average([])


def test_comparison_cell_percentages():
    matrix = compare([("Wiki-ES", _with_f(0.4218)), ("Token-GP", _with_f(0.2596))])
    assert matrix.cell("Wiki-ES", "Token-GP") == pytest.approx(62.48, abs=0.01)
    assert matrix.cell("Wiki-ES", "Wiki-ES") == 0.0
    assert "+62.48%" in matrix.format_table()


def test_comparison_pairs():
    assert relative_difference(0.2215, 0.2849) == pytest.approx(-22.25, abs=0.01)
    assert relative_difference(0.2849, 0.2215) == pytest.approx(28.62, abs=0.01)
    assert relative_difference(0.3, 0.0) is None
    matrix = compare([("a", _with_f(0.3)), ("b", _with_f(0.0))])
    assert matrix.cell("a", "b") is None
    assert "undefined" in matrix.format_table()


def test_comparison_needs_two_rules():
    with pytest.raises(EvaluationError) as excinfo:
        compare([("only", _with_f(0.5))])
    assert "need ≥2 rules" in str(excinfo.value)


def test_format_report_lists_metrics():
    text = format_report(metrics_from_counts(2, 1, 2, 5), title="held-out")
    assert text.splitlines()[0] == "held-out"
    assert "0.5714" in text and "0.7000" in text


def _with_f(f):
    report = metrics_from_counts(1, 1, 1, 1)
    return type(report)(f, report.precision, report.recall, report.accuracy, 1, 1, 1, 1)


def _substitute_records():
    """
    Training documents mention "alpha" (relevant) or "zeta"/"beta" (irrelevant),
    each with one filler. Held-out relevant documents mention "alpha" directly
    or only its related substitute "aleph", which shares no word with it.
    """
    train, test = [], []
    for filler in range(3, 7):
        for copy in range(2):
            train.append(CorpusRecord(f"tr-a{filler}{copy}", concepts=(1, filler), relevance=1))
        train.append(CorpusRecord(f"tr-z{filler}", concepts=(7, filler), relevance=0))
        train.append(CorpusRecord(f"tr-b{filler}", concepts=(8, filler), relevance=0))
        test.append(CorpusRecord(f"te-a{filler}", concepts=(1, filler), relevance=1))
        test.append(CorpusRecord(f"te-s{filler}", concepts=(2, filler), relevance=1))
        test.append(CorpusRecord(f"te-z{filler}", concepts=(7, filler), relevance=0))
        test.append(CorpusRecord(f"te-b{filler}", concepts=(8, filler), relevance=0))
    return train, test


def _unlabeled(records):
    return [CorpusRecord(r.doc_id, concepts=r.concepts) for r in records]


def test_substitutes_give_wiki_matcher_better_recall(substitute_graph, small_gp):
    assert substitute_graph.link_rel(1, 2) >= 0.7
    train, test = _substitute_records()
    labels = [record.relevance for record in train]
    test_labels = [record.relevance for record in test]

    wins = 0
    for seed in range(10):
        gp = small_gp.model_copy(update={"seed": seed})
        reports = {}
        for matcher in (Matcher.WIKI_RELATEDNESS, Matcher.EXACT_TOKEN):
            result, _ = learn_rule(train, labels, substitute_graph, gp,
                                   SensitivityConfig(matcher=matcher), threads=2)
            reports[matcher] = score_records(result.rule, test, test_labels, substitute_graph)
        wiki, token = reports[Matcher.WIKI_RELATEDNESS], reports[Matcher.EXACT_TOKEN]
        wins += wiki.recall - token.recall >= 0.20 and abs(wiki.precision - token.precision) <= 0.15
    assert wins >= 8


def test_token_rules_store_their_vocabulary(substitute_graph, small_gp):
    train, _ = _substitute_records()
    result, _ = learn_rule(train, [r.relevance for r in train], substitute_graph, small_gp,
                           SensitivityConfig(matcher=Matcher.EXACT_TOKEN))
    assert "alpha" in result.rule.labels.values()
    assert result.rule.sensitivity.matcher is Matcher.EXACT_TOKEN
    # a corpus without any of the rule's words still resolves every terminal
    report = score_records(result.rule, [CorpusRecord("x", text="zeta"), CorpusRecord("y", concepts=(8,))],
                           [0, 0], substitute_graph)
    assert report.true_negatives + report.false_positives == 2


def test_experiment_per_topic_reports(tmp_path, substitute_graph, small_gp):
    train, test = _substitute_records()
    qrels = {
        "alpha": {r.doc_id: r.relevance for r in train + test},
        "zeta": {r.doc_id: 1 for r in train + test if 7 in r.concepts},
        "empty": {},
    }
    result = run_experiment(substitute_graph, _unlabeled(train), _unlabeled(test), qrels,
                            gp=small_gp, sens=SensitivityConfig(), threads=2)

    assert [t.topic for t in result.topics] == ["alpha", "zeta"]
    assert result.skipped == ["empty"]
    assert result.averages[WIKI_MODEL].recall >= result.averages[TOKEN_MODEL].recall
    assert result.comparison.names == (WIKI_MODEL, TOKEN_MODEL)

    path = tmp_path / "breakdown.csv"
    write_topic_breakdown(path, result)
    with open(path, newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    assert tuple(rows[0]) == BREAKDOWN_COLUMNS
    assert len(rows) == 1 + 2 * 2
    assert rows[1][1] == WIKI_MODEL and rows[2][1] == TOKEN_MODEL
    assert rows[2][6] == ""


def test_experiment_without_trainable_topics(substitute_graph, small_gp):
    train, test = _substitute_records()
    with pytest.raises(EvaluationError):
        run_experiment(substitute_graph, _unlabeled(train), _unlabeled(test), {"none": {}}, gp=small_gp)


def test_experiment_ignores_inline_labels_of_unjudged_documents(substitute_graph, small_gp):
    # inline labels mark the "alpha" documents relevant; the topic judges only "zeta" documents
    train, test = _substitute_records()
    judged = {r.doc_id: 1 for r in train + test if 7 in r.concepts}
    result = run_experiment(substitute_graph, train, test, {"zeta": judged}, gp=small_gp, threads=2)

    held_out_relevant = sum(1 for r in test if r.doc_id in judged)
    assert held_out_relevant == 4
    for report in result.topics[0].reports.values():
        assert report.true_positives + report.false_negatives == held_out_relevant


def test_rule_complexity_of_hand_built_rule():
    mixed = or_(and_(term(1), term(2)), and_(term(3), not_(term(4))))
    rule = WikiEsRule((WeightedQuery(mixed, 0.9), WeightedQuery(term(5), 0.4)))
    assert rule_complexity(rule) == RuleComplexity(mean_size=4.5, max_depth=3.0)
    assert rule_complexity(WikiEsRule((WeightedQuery(term(5), 1.0),))) == RuleComplexity(1.0, 0.0)

    average = mean_complexity([RuleComplexity(4.5, 3.0), RuleComplexity(1.5, 1.0)])
    assert average == RuleComplexity(3.0, 2.0)
    with pytest.raises(EvaluationError):
        mean_complexity([])


def test_breakdown_and_payload_carry_complexity(tmp_path):
    mixed = or_(and_(term(1), term(2)), and_(term(3), not_(term(4))))
    report = metrics_from_counts(1, 1, 1, 1)
    rules = {
        WIKI_MODEL: WikiEsRule((WeightedQuery(term(1), 1.0),)),
        TOKEN_MODEL: WikiEsRule((WeightedQuery(mixed, 0.9), WeightedQuery(term(5), 0.4))),
    }
    topic = TopicResult("t1", {WIKI_MODEL: report, TOKEN_MODEL: report}, rules)
    averages = {WIKI_MODEL: report, TOKEN_MODEL: report}
    result = ExperimentResult(
        [topic], averages, compare(list(averages.items())),
        complexity={name: mean_complexity([c]) for name, c in topic.complexity.items()},
    )

    payload = result.to_dict()
    assert payload["topics"][0]["complexity"][TOKEN_MODEL] == {"mean_size": 4.5, "max_depth": 3.0}
    assert payload["complexity"][WIKI_MODEL] == {"mean_size": 1.0, "max_depth": 0.0}

    path = tmp_path / "breakdown.csv"
    write_topic_breakdown(path, result)
    with open(path, newline="", encoding="utf-8") as handle:
        rows = list(csv.DictReader(handle))
    assert (rows[0]["mean_query_size"], rows[0]["max_query_depth"]) == ("1.0000", "0")
    assert (rows[1]["mean_query_size"], rows[1]["max_query_depth"]) == ("4.5000", "3")


def test_score_is_invariant_under_corpus_permutation():
    graph = isolated_graph(6)
    rng = np.random.default_rng(17)
    rule = WikiEsRule((
        WeightedQuery(or_(term(1), and_(term(2), not_(term(3)))), 0.8),
        WeightedQuery(term(4), 0.3),
    ))
    for _ in range(50):
        corpus = [
            (profile(graph, *(c for c in range(1, 7) if rng.random() < 0.4), doc_id=f"d{i}"), int(rng.integers(2)))
            for i in range(int(rng.integers(1, 30)))
        ]
        expected = score(rule, corpus, graph)
        shuffled = [corpus[i] for i in rng.permutation(len(corpus))]
        assert score(rule, shuffled, graph) == expected
