"""
Wiki-ES - learning boolean concept queries for document filtering.

This is the command-line entry point. It wires document ingestion, rule
learning, filtering, threshold calibration and evaluation into reproducible
runs: every randomised command takes its randomness from one seed and writes a
manifest next to its artifact.

Key components:
- train / baseline: Learn a Wiki-ES rule (relatedness matcher) or the Token-GP
  baseline rule (exact token matcher)
- filter: Print the documents a rule accepts
- eval: Score one rule, or compare several, on a labeled corpus
- calibrate: Grid-search the acceptance thresholds c1 and c2
- annotate: Turn documents into a pre-annotated corpus
- experiment: Per-topic Wiki-ES versus Token-GP comparison driven by qrels

Exit statuses: 0 success, 1 runtime failure, 2 usage error.

License: MIT
"""

import argparse
import hashlib
import json
import os
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from dotenv import load_dotenv

from components.evaluation import compare, format_report, reports_table
from components.experiment import (
    document_model, learn_rule, run_experiment, score_records, write_topic_breakdown,
)
from components.gp_engine import DEFAULT_C1_GRID, DEFAULT_C2_GRID, TrainingSet, calibrate_thresholds
from components.query_model import QueryEvaluator, RELEVANCE_THRESHOLD, load_rule, save_rule
from utils.annotator import (
    Annotator, CorpusRecord, load_corpus, load_qrels, profiles_from_records, read_documents,
    relevance_labels, write_profiles,
)
from utils.concept_graph import load_graph
from utils.config_utils import Matcher, load_run_config, resolve_threads, write_sensitivity
from utils.errors import ConfigError, WikiEsError
from utils.log_utils import configure_logging, get_logger

# Load environment variables
load_dotenv()

logger = get_logger("cli")


@dataclass
class RunManifest:
    """Audit record of one command run, stored as ``<out>.manifest.json``."""

    command: str
    config: dict
    inputs: Dict[str, str]
    seed: Optional[int]
    artifacts: List[str]
    duration_seconds: float = 0.0
    extra: dict = field(default_factory=dict)


def file_digest(path) -> str:
    """sha256 hex digest of a file."""
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def input_digests(paths: Sequence) -> Dict[str, str]:
    digests = {}
    for path in paths:
        if path is None:
            continue
        path = Path(path)
        if path.is_dir():
            for child in sorted(p for p in path.iterdir() if p.is_file()):
                digests[str(child)] = file_digest(child)
        else:
            digests[str(path)] = file_digest(path)
    return digests


def write_manifest(out, manifest: RunManifest) -> Path:
    """Write the manifest next to ``out`` via a temporary file and an atomic rename."""
    target = Path(f"{out}.manifest.json")
    payload = json.dumps(asdict(manifest), indent=2, sort_keys=True) + "\n"
    fd, temp_path = tempfile.mkstemp(prefix=target.name, suffix=".tmp", dir=target.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(payload)
        os.replace(temp_path, target)
    except BaseException:
        if os.path.exists(temp_path):
            os.unlink(temp_path)
        raise
    logger.info("Wrote manifest %s", target)
    return target


def parse_grid(text: str) -> List[float]:
    """Parse a comma-separated list of thresholds in (0, 1]."""
    try:
        values = [float(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"invalid threshold list {text!r}") from e
    if not values or any(not 0.0 < v <= 1.0 for v in values):
        raise argparse.ArgumentTypeError(f"thresholds must lie in (0, 1]: {text!r}")
    return values


def parse_seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from e
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from e
    if value < 1:
        raise argparse.ArgumentTypeError("value must be at least 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wikies",
        description="Learn and apply boolean concept queries backed by Wikipedia link relatedness.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    graph = argparse.ArgumentParser(add_help=False)
    graph.add_argument("--graph", required=True, help="concept graph (JSON lines)")

    labels = argparse.ArgumentParser(add_help=False)
    labels.add_argument("--qrels", help="relevance file: topic_id TAB doc_id TAB 0|1")
    labels.add_argument("--topic", help="topic of --qrels to use")

    run = argparse.ArgumentParser(add_help=False)
    run.add_argument("--config", help="run configuration (JSON)")
    run.add_argument("--seed", type=parse_seed, help="overrides the configured seed")
    run.add_argument("--threads", type=positive_int, help="worker cap (default: WIKIES_THREADS or all cores)")

    train = subparsers.add_parser("train", parents=[graph, labels, run], help="learn a rule")
    train.add_argument("--corpus", required=True)
    train.add_argument("--out", required=True, help="rule file to write")
    train.add_argument("--matcher", choices=[m.value for m in Matcher], help="overrides the configured matcher")

    baseline = subparsers.add_parser("baseline", parents=[graph, labels, run],
                                     help="learn the Token-GP baseline rule")
    baseline.add_argument("--corpus", required=True)
    baseline.add_argument("--out", required=True, help="rule file to write")

    filter_ = subparsers.add_parser("filter", parents=[graph], help="print documents a rule accepts")
    filter_.add_argument("--rule", required=True)
    filter_.add_argument("--corpus", required=True)
    filter_.add_argument("--with-scores", action="store_true", help="print 'doc_id<TAB>mu'")

    eval_ = subparsers.add_parser("eval", parents=[graph, labels], help="score rules on a labeled corpus")
    eval_.add_argument("--rule")
    eval_.add_argument("--corpus", required=True)
    eval_.add_argument("--compare", nargs="+", metavar="PATH", help="rule files to compare (at least 2 in total)")
    eval_.add_argument("--json", action="store_true", help="print structured output")

    calibrate = subparsers.add_parser("calibrate", parents=[graph, labels], help="choose c1 and c2")
    calibrate.add_argument("--corpus", required=True)
    calibrate.add_argument("--out", required=True, help="configuration file to write")
    calibrate.add_argument("--config", help="run configuration (its terminal_cap is used)")
    calibrate.add_argument("--grid-c1", type=parse_grid, default=list(DEFAULT_C1_GRID))
    calibrate.add_argument("--grid-c2", type=parse_grid, default=list(DEFAULT_C2_GRID))

    annotate = subparsers.add_parser("annotate", parents=[graph], help="write a pre-annotated corpus")
    annotate.add_argument("--input", required=True, help="directory of documents or a corpus file")
    annotate.add_argument("--out", required=True)

    experiment = subparsers.add_parser("experiment", parents=[graph, run],
                                       help="compare Wiki-ES and Token-GP per topic")
    experiment.add_argument("--corpus", required=True, help="training corpus")
    experiment.add_argument("--test-corpus", required=True)
    experiment.add_argument("--qrels", required=True)
    experiment.add_argument("--topic", action="append", help="topic to run (repeatable; default all)")
    experiment.add_argument("--breakdown", help="per-topic CSV to write")
    experiment.add_argument("--out", help="structured result (JSON) to write")

    return parser


def _labels(args, records: Sequence[CorpusRecord]) -> List[int]:
    """Relevance labels from --qrels/--topic, falling back to the inline labels."""
    judgments = None
    if args.qrels:
        qrels = load_qrels(args.qrels)
        if args.topic is None:
            if len(qrels) != 1:
                raise ConfigError(f"{args.qrels} holds {len(qrels)} topics; choose one with --topic")
            judgments = next(iter(qrels.values()))
        else:
            if args.topic not in qrels:
                raise ConfigError(f"topic {args.topic!r} not found in {args.qrels}")
            judgments = qrels[args.topic]
    elif args.topic is not None:
        raise ConfigError("--topic requires --qrels")
    return relevance_labels(records, judgments)


def _run_config(args, matcher: Optional[Matcher] = None):
    gp, sens = load_run_config(args.config)
    if args.seed is not None:
        gp = gp.model_copy(update={"seed": args.seed})
    if matcher is not None:
        sens = sens.model_copy(update={"matcher": matcher})
    return gp, sens


def _train(args, matcher: Optional[Matcher]) -> int:
    started = time.monotonic()
    gp, sens = _run_config(args, matcher)
    graph = load_graph(args.graph)
    records = load_corpus(args.corpus)
    labels = _labels(args, records)

    result, report = learn_rule(records, labels, graph, gp, sens, threads=args.threads)
    save_rule(args.out, result.rule)
    logger.info("Wrote rule with %d queries to %s", len(result.rule.queries), args.out)
    print(format_report(report, title=f"Training report ({sens.matcher.value} matcher)"))

    manifest = RunManifest(
        command=args.command,
        config={"gp": gp.model_dump(mode="json"), "sensitivity": sens.model_dump(mode="json")},
        inputs=input_digests([args.graph, args.corpus, args.config, args.qrels]),
        seed=gp.resolved_seed(),
        artifacts=[str(args.out)],
        duration_seconds=round(time.monotonic() - started, 3),
        extra={"threads": resolve_threads(args.threads), "training_report": report.to_dict()},
    )
    write_manifest(args.out, manifest)
    return 0


def cmd_train(args) -> int:
    return _train(args, Matcher(args.matcher) if args.matcher else None)


def cmd_baseline(args) -> int:
    return _train(args, Matcher.EXACT_TOKEN)


def cmd_filter(args) -> int:
    rule = load_rule(args.rule)
    graph = load_graph(args.graph)
    records = load_corpus(args.corpus)
    if not records:
        return 0

    model_graph, profiles = document_model(records, graph, rule.sensitivity.matcher, rule)
    votes = QueryEvaluator(model_graph, profiles, rule.sensitivity).votes(rule)
    accepted = 0
    for profile, mu in zip(profiles, votes):
        if mu > RELEVANCE_THRESHOLD:
            accepted += 1
            print(f"{profile.doc_id}\t{mu:.6f}" if args.with_scores else profile.doc_id)
    logger.info("Accepted %d of %d documents", accepted, len(profiles))
    return 0


def cmd_eval(args) -> int:
    paths = ([args.rule] if args.rule else []) + list(args.compare or [])
    if not paths:
        raise ConfigError("eval needs --rule or --compare")
    graph = load_graph(args.graph)
    records = load_corpus(args.corpus)
    labels = _labels(args, records)

    reports = [(str(path), score_records(load_rule(path), records, labels, graph)) for path in paths]

    if args.compare is None:
        name, report = reports[0]
        print(json.dumps(report.to_dict(), indent=2) if args.json else format_report(report, title=name))
        return 0

    matrix = compare(reports)
    if args.json:
        payload = {"reports": {name: r.to_dict() for name, r in reports}, "comparison": matrix.to_dict()}
        print(json.dumps(payload, indent=2))
    else:
        print(reports_table(dict(reports)))
        print()
        print(matrix.format_table())
    return 0


def cmd_calibrate(args) -> int:
    started = time.monotonic()
    gp, _ = load_run_config(args.config)
    graph = load_graph(args.graph)
    records = load_corpus(args.corpus)
    training = TrainingSet.from_pairs(profiles_from_records(records, graph), _labels(args, records))

    sensitivity = calibrate_thresholds(training, graph, (args.grid_c1, args.grid_c2), gp.terminal_cap)
    write_sensitivity(args.out, sensitivity)
    print(f"c1={sensitivity.c1} c2={sensitivity.c2}")

    write_manifest(args.out, RunManifest(
        command=args.command,
        config={"grid_c1": args.grid_c1, "grid_c2": args.grid_c2, "terminal_cap": gp.terminal_cap},
        inputs=input_digests([args.graph, args.corpus, args.config, args.qrels]),
        seed=None,
        artifacts=[str(args.out)],
        duration_seconds=round(time.monotonic() - started, 3),
        extra={"sensitivity": sensitivity.model_dump(mode="json")},
    ))
    return 0


def cmd_annotate(args) -> int:
    started = time.monotonic()
    graph = load_graph(args.graph)
    source = Path(args.input)
    if source.is_dir():
        annotator = Annotator(graph)
        profiles = [annotator.annotate(doc) for doc in read_documents(source)]
        relevance = None
    else:
        records = load_corpus(source)
        profiles = profiles_from_records(records, graph)
        relevance = [record.relevance for record in records]
    write_profiles(args.out, profiles, relevance)
    empty = sum(1 for profile in profiles if profile.is_empty())
    logger.info("Annotated %d documents (%d without concepts) into %s", len(profiles), empty, args.out)

    write_manifest(args.out, RunManifest(
        command=args.command,
        config={},
        inputs=input_digests([args.graph, source]),
        seed=None,
        artifacts=[str(args.out)],
        duration_seconds=round(time.monotonic() - started, 3),
    ))
    return 0


def cmd_experiment(args) -> int:
    started = time.monotonic()
    gp, sens = _run_config(args)
    graph = load_graph(args.graph)
    result = run_experiment(
        graph, load_corpus(args.corpus), load_corpus(args.test_corpus), load_qrels(args.qrels),
        topics=args.topic, gp=gp, sens=sens, threads=args.threads,
    )
    print(reports_table(result.averages))
    print()
    print(result.comparison.format_table())
    print()
    for name, complexity in result.complexity.items():
        print(f"{name}: mean query size {complexity.mean_size:.2f}, deepest query {complexity.max_depth:.2f}")

    artifacts = []
    if args.breakdown:
        write_topic_breakdown(args.breakdown, result)
        artifacts.append(str(args.breakdown))
    if args.out:
        Path(args.out).write_text(json.dumps(result.to_dict(), indent=2) + "\n", encoding="utf-8")
        artifacts.append(str(args.out))
        write_manifest(args.out, RunManifest(
            command=args.command,
            config={"gp": gp.model_dump(mode="json"), "sensitivity": sens.model_dump(mode="json")},
            inputs=input_digests([args.graph, args.corpus, args.test_corpus, args.qrels, args.config]),
            seed=gp.resolved_seed(),
            artifacts=artifacts,
            duration_seconds=round(time.monotonic() - started, 3),
            extra={"topics": [t.topic for t in result.topics], "skipped": result.skipped},
        ))
    return 0


COMMANDS = {
    "train": cmd_train,
    "baseline": cmd_baseline,
    "filter": cmd_filter,
    "eval": cmd_eval,
    "calibrate": cmd_calibrate,
    "annotate": cmd_annotate,
    "experiment": cmd_experiment,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one subcommand.

    Args:
        argv (Sequence[str], optional): Arguments without the program name

    Returns:
        int: 0 on success, 1 on a runtime failure (argparse exits with 2 on usage errors)
    """
    args = build_parser().parse_args(argv)
    try:
        configure_logging()
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1

    try:
        return COMMANDS[args.command](args)
    except (WikiEsError, OSError) as e:
        logger.debug("Command %s failed", args.command, exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
