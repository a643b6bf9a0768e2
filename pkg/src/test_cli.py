"""End-to-end tests of the command-line subcommands."""

import json

import pytest

from components.query_model import load_rule
from conftest import SAMPLE_GRAPH, write_jsonl
from main import main
from utils.config_utils import load_run_config

PLANTED = [
    {"doc_id": "r1", "concepts": [1], "relevance": 1},
    {"doc_id": "r2", "concepts": [1, 13], "relevance": 1},
    {"doc_id": "r3", "concepts": [1, 6], "relevance": 1},
    {"doc_id": "r4", "concepts": [1, 11], "relevance": 1},
    {"doc_id": "n1", "concepts": [13], "relevance": 0},
    {"doc_id": "n2", "concepts": [6, 11], "relevance": 0},
    {"doc_id": "n3", "concepts": [11], "relevance": 0},
    {"doc_id": "n4", "concepts": [13, 6], "relevance": 0},
]

RUN_CONFIG = {
    "generations": 20,
    "subpopulations": 3,
    "subpopulation_size": 20,
    "initial_depth": 2,
    "max_crossover_depth": 4,
    "terminal_cap": 5,
    "sensitivity": {"c1": 0.95, "c2": 0.5},
}


@pytest.fixture
def workspace(tmp_path):
    write_jsonl(tmp_path / "corpus.jsonl", PLANTED)
    (tmp_path / "config.json").write_text(json.dumps(RUN_CONFIG), encoding="utf-8")
    return tmp_path


def _train(workspace, out, *extra):
    return main([
        "train", "--graph", str(SAMPLE_GRAPH), "--corpus", str(workspace / "corpus.jsonl"),
        "--config", str(workspace / "config.json"), "--out", str(workspace / out), *extra,
    ])


def test_train_writes_rule_and_manifest(workspace, capsys):
    assert _train(workspace, "rule.json", "--seed", "3") == 0
    output = capsys.readouterr().out
    assert "F-score" in output and "1.0000" in output

    rule = load_rule(workspace / "rule.json")
    assert len(rule.queries) == 3
    manifest = json.loads((workspace / "rule.json.manifest.json").read_text(encoding="utf-8"))
    assert manifest["command"] == "train"
    assert manifest["seed"] == 3
    assert str(SAMPLE_GRAPH) in manifest["inputs"]
    assert len(manifest["inputs"][str(SAMPLE_GRAPH)]) == 64
    assert manifest["artifacts"] == [str(workspace / "rule.json")]


def test_training_is_reproducible_across_thread_counts(workspace):
    assert _train(workspace, "a.json", "--seed", "9", "--threads", "1") == 0
    assert _train(workspace, "b.json", "--seed", "9", "--threads", "3") == 0
    assert (workspace / "a.json").read_bytes() == (workspace / "b.json").read_bytes()


def test_train_exact_matches_baseline(workspace):
    assert _train(workspace, "exact.json", "--seed", "5", "--matcher", "exact") == 0
    assert main([
        "baseline", "--graph", str(SAMPLE_GRAPH), "--corpus", str(workspace / "corpus.jsonl"),
        "--config", str(workspace / "config.json"), "--seed", "5", "--out", str(workspace / "base.json"),
    ]) == 0
    assert (workspace / "exact.json").read_bytes() == (workspace / "base.json").read_bytes()
    assert load_rule(workspace / "base.json").sensitivity.matcher.value == "exact"


def test_missing_graph_is_a_usage_error(workspace):
    with pytest.raises(SystemExit) as excinfo:
        main(["train", "--corpus", str(workspace / "corpus.jsonl"), "--out", str(workspace / "r.json")])
    assert excinfo.value.code == 2


def test_runtime_errors_exit_with_one(workspace, capsys):
    write_jsonl(workspace / "bad.jsonl", [{"doc_id": "x", "concepts": [999], "relevance": 1}])
    code = main(["train", "--graph", str(SAMPLE_GRAPH), "--corpus", str(workspace / "bad.jsonl"),
                 "--out", str(workspace / "r.json")])
    assert code == 1
    assert "unknown concept id 999" in capsys.readouterr().err


def test_degenerate_training_set_exits_with_one(workspace, capsys):
    write_jsonl(workspace / "one.jsonl", [{"doc_id": "x", "concepts": [1], "relevance": 1}])
    code = main(["train", "--graph", str(SAMPLE_GRAPH), "--corpus", str(workspace / "one.jsonl"),
                 "--out", str(workspace / "r.json")])
    assert code == 1
    assert "degenerate" in capsys.readouterr().err


@pytest.mark.parametrize("sensitivity", [[0.9, 0.5], 0.9, "strict"])
def test_non_object_sensitivity_exits_with_one(workspace, capsys, sensitivity):
    (workspace / "config.json").write_text(json.dumps({**RUN_CONFIG, "sensitivity": sensitivity}), encoding="utf-8")
    assert _train(workspace, "r.json") == 1
    assert '"sensitivity" must be a JSON object' in capsys.readouterr().err


def _write_rule(path, expression="w1", c2=0.99):
    rule = {"matcher": "wiki", "c1": 0.99, "c2": c2, "terminal_set": [1], "labels": {"1": "Espionage"},
            "queries": [{"expression": expression, "fitness": 1.0}]}
    path.write_text(json.dumps(rule), encoding="utf-8")
    return path


def test_filter_prints_matching_ids_in_corpus_order(tmp_path, capsys):
    docs = [{"doc_id": f"doc{i}", "concepts": [1, 13] if i in (2, 5, 9) else [13]} for i in range(10)]
    corpus = write_jsonl(tmp_path / "corpus.jsonl", docs)
    rule = _write_rule(tmp_path / "rule.json")

    assert main(["filter", "--graph", str(SAMPLE_GRAPH), "--rule", str(rule), "--corpus", str(corpus)]) == 0
    assert capsys.readouterr().out.split() == ["doc2", "doc5", "doc9"]

    assert main(["filter", "--graph", str(SAMPLE_GRAPH), "--rule", str(rule), "--corpus", str(corpus),
                 "--with-scores"]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "doc2\t1.000000"


def test_filter_on_empty_corpus(tmp_path, capsys):
    corpus = tmp_path / "empty.jsonl"
    corpus.write_text("", encoding="utf-8")
    rule = _write_rule(tmp_path / "rule.json")
    assert main(["filter", "--graph", str(SAMPLE_GRAPH), "--rule", str(rule), "--corpus", str(corpus)]) == 0
    assert capsys.readouterr().out == ""


def test_eval_and_compare(workspace, capsys):
    perfect = _write_rule(workspace / "perfect.json")
    # Goldman Sachs: matches r3, n2 and n4, so F = 2/7
    weak = _write_rule(workspace / "weak.json", expression="w6")
    corpus = str(workspace / "corpus.jsonl")

    assert main(["eval", "--graph", str(SAMPLE_GRAPH), "--rule", str(perfect), "--corpus", corpus, "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["f_score"] == 1.0

    assert main(["eval", "--graph", str(SAMPLE_GRAPH), "--corpus", corpus,
                 "--compare", str(perfect), str(weak), "--json"]) == 0
    payload = json.loads(capsys.readouterr().out)
    cells = payload["comparison"]["relative_difference_percent"]
    assert cells[str(perfect)][str(weak)] == pytest.approx(100 * (1.0 - 2 / 7) / (2 / 7))

    assert main(["eval", "--graph", str(SAMPLE_GRAPH), "--corpus", corpus, "--compare", str(perfect)]) == 1
    assert "need ≥2 rules" in capsys.readouterr().err


def test_eval_with_qrels_topic(workspace, capsys):
    qrels = workspace / "qrels.tsv"
    qrels.write_text("t1\tr1\t0\nt1\tn1\t1\nt2\tr1\t1\n", encoding="utf-8")
    rule = _write_rule(workspace / "rule.json")
    args = ["eval", "--graph", str(SAMPLE_GRAPH), "--rule", str(rule), "--corpus", str(workspace / "corpus.jsonl"),
            "--qrels", str(qrels)]
    assert main(args) == 1
    assert "--topic" in capsys.readouterr().err
    assert main(args + ["--topic", "t1", "--json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert (report["false_positives"], report["false_negatives"]) == (1, 1)


def test_calibrate_writes_a_loadable_config(workspace, capsys):
    out = workspace / "sensitivity.json"
    assert main(["calibrate", "--graph", str(SAMPLE_GRAPH), "--corpus", str(workspace / "corpus.jsonl"),
                 "--out", str(out), "--grid-c1", "0.9", "--grid-c2", "0.5,0.7"]) == 0
    assert json.loads(out.read_text(encoding="utf-8"))["sensitivity"]["c1"] == 0.9
    assert capsys.readouterr().out.startswith("c1=0.9")
    assert (workspace / "sensitivity.json.manifest.json").exists()

    # the calibration output is a valid --config file
    _, sensitivity = load_run_config(out)
    assert sensitivity.c1 == 0.9


def test_bad_grid_is_a_usage_error(workspace):
    with pytest.raises(SystemExit) as excinfo:
        main(["calibrate", "--graph", str(SAMPLE_GRAPH), "--corpus", str(workspace / "corpus.jsonl"),
              "--out", str(workspace / "s.json"), "--grid-c2", "0.5,1.5"])
    assert excinfo.value.code == 2


def test_annotate_directory(tmp_path):
    docs = tmp_path / "docs"
    docs.mkdir()
    (docs / "a.txt").write_text("Goldman Sachs faces a lawsuit", encoding="utf-8")
    (docs / "b.md").write_text("# Football\n\nNothing else.", encoding="utf-8")
    out = tmp_path / "annotated.jsonl"

    assert main(["annotate", "--graph", str(SAMPLE_GRAPH), "--input", str(docs), "--out", str(out)]) == 0
    records = [json.loads(line) for line in out.read_text(encoding="utf-8").splitlines()]
    assert records == [{"doc_id": "a", "concepts": [6, 5]}, {"doc_id": "b", "concepts": [13]}]


def test_annotate_sample_corpus_keeps_labels(tmp_path):
    out = tmp_path / "annotated.jsonl"
    corpus = SAMPLE_GRAPH.parent / "sample_corpus.jsonl"
    assert main(["annotate", "--graph", str(SAMPLE_GRAPH), "--input", str(corpus), "--out", str(out)]) == 0
    records = [json.loads(line) for line in out.read_text(encoding="utf-8").splitlines()]
    assert len(records) == 10
    assert records[5] == {"doc_id": "d06", "concepts": [6, 11, 12], "relevance": 0}


def test_log_level_from_environment(workspace, monkeypatch, capsys):
    monkeypatch.setenv("WIKIES_LOG", "verbose")
    rule = _write_rule(workspace / "rule.json")
    code = main(["filter", "--graph", str(SAMPLE_GRAPH), "--rule", str(rule),
                 "--corpus", str(workspace / "corpus.jsonl")])
    assert code == 1
    assert "Invalid log level" in capsys.readouterr().err


def test_experiment_on_sample_data(tmp_path, capsys):
    data = SAMPLE_GRAPH.parent
    breakdown, out = tmp_path / "topics.csv", tmp_path / "experiment.json"
    assert main([
        "experiment", "--graph", str(SAMPLE_GRAPH), "--corpus", str(data / "sample_corpus.jsonl"),
        "--test-corpus", str(data / "sample_corpus.jsonl"), "--qrels", str(data / "sample_qrels.tsv"),
        "--config", str(data / "sample_config.json"), "--threads", "2",
        "--breakdown", str(breakdown), "--out", str(out),
    ]) == 0
    assert "Wiki-ES" in capsys.readouterr().out
    result = json.loads(out.read_text(encoding="utf-8"))
    assert [t["topic"] for t in result["topics"]] == ["banking", "espionage"]
    assert result["comparison"]["models"] == ["Wiki-ES", "Token-GP"]
    assert len(breakdown.read_text(encoding="utf-8").splitlines()) == 5
    manifest = json.loads((tmp_path / "experiment.json.manifest.json").read_text(encoding="utf-8"))
    assert manifest["seed"] == 7
    assert manifest["artifacts"] == [str(breakdown), str(out)]
