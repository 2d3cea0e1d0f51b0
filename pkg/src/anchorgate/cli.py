"""Command-line entry point.

Exit codes: 0 success, 1 partial (some chain incomplete or sample invalid),
2 usage or input error, 3 retry-class gate rejection, 4 rollback-class
gate rejection.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from anchorgate.anchors import load_library, mine_anchors
from anchorgate.errors import AnchorGateError, ConfigError
from anchorgate.gate import GateContext, TestHarness, run_gate
from anchorgate.metrics import ablation_summaries, summarize, write_comparison, write_summary
from anchorgate.model import (
    LAYERS,
    SCHEMA_VERSION,
    Category,
    ChainStatus,
    CodeSnapshot,
    Decision,
    Language,
    Mode,
    SecuritySpec,
    Strategy,
    atomic_write_text,
    loads_record,
    read_records,
    to_jsonable,
)
from anchorgate.orchestrator import (
    ABLATION_ORDER,
    RunConfig,
    bundled_corpus,
    discover,
    load_config,
    load_sample,
    run_ablation,
    run_suite,
)

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE, EXIT_RETRY, EXIT_ROLLBACK = 0, 1, 2, 3, 4

log = logging.getLogger("anchorgate")


class UsageError(Exception):
    """Bad flags or unreadable inputs; maps to exit code 2."""


def _corpus_path(arg: str) -> Path:
    """A directory, or ``bundled:<name>`` for a corpus shipped with the package."""
    if arg.startswith("bundled:"):
        return bundled_corpus(arg.split(":", 1)[1])
    path = Path(arg)
    if not path.is_dir():
        raise UsageError(f"corpus directory not found: {arg}")
    return path


def _read_snapshot(path: str) -> CodeSnapshot:
    try:
        text = Path(path).read_text("utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    return CodeSnapshot(text, Language.from_path(path))


def _config(args) -> RunConfig:
    overrides = {}
    for key in ("mode", "iterations", "parallelism", "delta_max", "r_max", "generator", "sast", "reviewer"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    return load_config(args.config, overrides=overrides)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_validate_corpus(args) -> int:
    samples, problems = discover(_corpus_path(args.corpus))
    for s in samples:
        print(f"ok       {s.sample_id:<28} {s.category.value:<15} {s.language.value}")
    for path, reason in problems:
        print(f"invalid  {path}: {reason}")
    if not samples:
        print("no valid samples", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_PARTIAL if problems else EXIT_OK


def cmd_mine(args) -> int:
    try:
        sample = load_sample(args.sample)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None
    library = load_library(critical_selectors=tuple(args.critical or ()))
    spec = mine_anchors(sample.snapshot(), sample.category, library=library)
    rows = [(a.anchor_id, a.priority.value, a.lock_level.value, a.anchor_type.value, a.source, a.display)
            for a in spec.anchors]
    header = ("id", "priority", "lock", "type", "source", "anchor")
    widths = [max(len(str(r[i])) for r in [header, *rows]) for i in range(len(header) - 1)]
    for r in [header, *rows]:
        print("  ".join(str(c).ljust(w) for c, w in zip(r, widths)) + "  " + r[-1])
    print(f"\n{len(spec.anchors)} anchors; rule base: {', '.join(spec.rule_base) or '-'}")
    if args.json:
        atomic_write_text(args.json, json.dumps({"schema_version": SCHEMA_VERSION, "spec": to_jsonable(spec)},
                                                indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def _load_spec(args, prev: CodeSnapshot) -> SecuritySpec:
    category = Category(args.category) if args.category else None
    if args.spec:
        try:
            data = json.loads(Path(args.spec).read_text("utf-8"))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read spec {args.spec}: {exc}") from None
        return loads_record(json.dumps(data.get("spec", data)), SecuritySpec)
    if args.mine:
        return mine_anchors(prev, category)
    return SecuritySpec(category=category)


def cmd_gate(args) -> int:
    prev = _read_snapshot(args.prev)
    candidate = _read_snapshot(args.candidate)
    if prev.language is not candidate.language:
        raise UsageError("previous and candidate files must be in the same language")
    spec = _load_spec(args, prev)
    cfg = _config(args).gate
    layers = tuple(args.layers.split(",")) if args.layers else LAYERS
    harness = None
    if args.tests:
        if not args.test_command:
            raise UsageError("--tests requires --test-command")
        harness = TestHarness(Path(args.tests), args.test_command)
    elif "correctness" in layers:
        layers = tuple(l for l in layers if l != "correctness")
        print("note: no --tests given, correctness layer skipped", file=sys.stderr)
    report = run_gate(prev, candidate, spec, cfg, ctx=GateContext(harness=harness), layers=layers,
                      attempt_index=args.attempt)
    for layer in LAYERS:
        verdict = report.verdict(layer)
        print(f"{layer:<17} {verdict.value if verdict else '-'}")
    if report.delta_ch is not None:
        print(f"delta_ch={report.delta_ch} delta_rho={report.delta_rho:.6f}")
    for f in report.new_findings:
        print(f"  new finding {f.rule_id} [{f.severity.value}] line {f.line}: {f.message}")
    for item in report.budget_exceeded:
        print(f"  budget exceeded: {item}")
    for c in report.anchor_checks:
        if c.verdict.value != "pass":
            print(f"  anchor {c.anchor_id} [{c.priority.value}] {c.verdict.value}: {c.label or c.selector}")
    for t in report.failing_tests:
        print(f"  failing test: {t}")
    if report.diagnostic:
        print(f"  diagnostic: {report.diagnostic}")
    print(f"decision: {report.decision.value}")
    if args.json:
        atomic_write_text(args.json, json.dumps({"schema_version": SCHEMA_VERSION, "report": to_jsonable(report)},
                                                indent=2, sort_keys=True) + "\n")
    return {Decision.ACCEPT: EXIT_OK, Decision.RETRY: EXIT_RETRY, Decision.ROLLBACK: EXIT_ROLLBACK}[report.decision]


def _strategies(args) -> tuple[Strategy, ...]:
    return tuple(Strategy(s) for s in args.strategy) if args.strategy else tuple(Strategy)


def _finish_run(result, out: Path) -> int:
    summary = summarize(result.records, result.records[0].mode.value if result.records else "")
    write_summary(out, summary, result.records)
    print((out / "summary.txt").read_text("utf-8"), end="")
    if not result.complete:
        print(f"incomplete run, see {out / 'manifest.json'}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_run_chain(args) -> int:
    try:
        sample = load_sample(args.sample)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None
    cfg = _config(args)
    # a one-sample corpus view: run_suite discovers the sample directory itself
    result = run_suite(sample.path, (Strategy(args.strategy),), cfg, out_dir=args.out)
    return _finish_run(result, Path(args.out))


def cmd_run_suite(args) -> int:
    corpus = _corpus_path(args.corpus)
    cfg = _config(args)
    out = Path(args.out)
    if not args.ablation:
        return _finish_run(run_suite(corpus, _strategies(args), cfg, out_dir=out), out)
    results = run_ablation(corpus, _strategies(args), cfg, out_dir=out)
    for mode, res in results.items():
        write_summary(out / mode.value, summarize(res.records, mode.value), res.records)
    summaries = ablation_summaries({m: r.records for m, r in results.items()})
    print(write_comparison(out, summaries), end="")
    incomplete = [m.value for m, r in results.items() if not r.complete]
    if incomplete:
        print(f"incomplete settings: {', '.join(incomplete)}; see */manifest.json", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def _records_of(path: str) -> list:
    p = Path(path)
    if p.is_dir():
        p = p / "records.jsonl"
    try:
        return read_records(p)
    except OSError as exc:
        raise UsageError(f"cannot read records {p}: {exc.strerror}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"malformed records {p}: {exc}") from None


def cmd_report(args) -> int:
    records = _records_of(args.run)
    paired = _records_of(args.paired) if args.paired else None
    out = Path(args.out or (args.run if Path(args.run).is_dir() else Path(args.run).parent))
    summary = summarize(records, args.label or (records[0].mode.value if records else ""), paired)
    write_summary(out, summary, records)
    print((out / "summary.txt").read_text("utf-8"), end="")
    return EXIT_OK if all(r.status is ChainStatus.COMPLETE for r in records) else EXIT_PARTIAL


def cmd_compare(args) -> int:
    runs: dict[Mode, list] = {}
    for path in args.runs:
        records = _records_of(path)
        if not records:
            raise UsageError(f"{path}: no records")
        mode = records[0].mode
        if mode in runs:
            raise UsageError(f"two runs for mode {mode.value}")
        runs[mode] = records
    order = [m for m in ABLATION_ORDER if m in runs] + sorted((m for m in runs if m not in ABLATION_ORDER),
                                                              key=lambda m: m.value)
    summaries = ablation_summaries({m: runs[m] for m in order})
    print(write_comparison(args.out, summaries), end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--mode", choices=[m.value for m in Mode])
    p.add_argument("--iterations", type=int, help="tasks per chain (overrides sample.meta)")
    p.add_argument("--parallelism", type=int)
    p.add_argument("--delta-max", dest="delta_max", type=int)
    p.add_argument("--r-max", dest="r_max", type=int)
    p.add_argument("--generator", choices=["scripted", "http"])
    p.add_argument("--sast", choices=["builtin", "external"])
    p.add_argument("--reviewer", choices=["heuristic", "http", "none"])
    p.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="anchorgate", description="Gated, anchor-protected iterative refinement.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate-corpus", help="check every sample of a corpus")
    p.add_argument("corpus", help="corpus directory or bundled:<name>")
    p.set_defaults(func=cmd_validate_corpus)

    p = sub.add_parser("mine", help="list the anchors mined from a sample")
    p.add_argument("sample", help="sample directory")
    p.add_argument("--critical", action="append", help="selector or label to promote to critical")
    p.add_argument("--json", help="also write the spec as JSON here")
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("gate", help="gate one candidate against the previous version")
    p.add_argument("prev")
    p.add_argument("candidate")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--spec", help="spec JSON as written by 'mine --json'")
    group.add_argument("--mine", action="store_true", help="mine anchors from the previous version")
    p.add_argument("--category", choices=[c.value for c in Category])
    p.add_argument("--tests", help="tests directory for the correctness layer")
    p.add_argument("--test-command", dest="test_command")
    p.add_argument("--layers", help=f"comma-separated subset of {','.join(LAYERS)}")
    p.add_argument("--attempt", type=int, default=0, help="zero-based attempt index")
    p.add_argument("--config")
    p.add_argument("--delta-max", dest="delta_max", type=int)
    p.add_argument("--r-max", dest="r_max", type=int)
    p.add_argument("--json", help="also write the report as JSON here")
    p.set_defaults(func=cmd_gate)

    p = sub.add_parser("run-chain", help="run one sample under one strategy")
    p.add_argument("sample")
    p.add_argument("--strategy", default=Strategy.FEATURE_ENHANCEMENT.value, choices=[s.value for s in Strategy])
    _add_run_flags(p)
    p.set_defaults(func=cmd_run_chain)

    p = sub.add_parser("run-suite", help="run every sample and strategy of a corpus")
    p.add_argument("corpus", help="corpus directory or bundled:<name>")
    p.add_argument("--strategy", action="append", choices=[s.value for s in Strategy])
    p.add_argument("--ablation", action="store_true", help="run the five ablation settings")
    _add_run_flags(p)
    p.set_defaults(func=cmd_run_suite)

    p = sub.add_parser("report", help="recompute the summary of a run")
    p.add_argument("run", help="run directory or records file")
    p.add_argument("--paired", help="run without assimilation, for the counterexample effectiveness rate")
    p.add_argument("--label")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("compare", help="side-by-side table of several runs")
    p.add_argument("runs", nargs="+", help="run directories or records files, one per mode")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AnchorGateError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
