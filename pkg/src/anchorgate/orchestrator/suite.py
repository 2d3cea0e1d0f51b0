"""Multi-chain runs: one chain per (sample, strategy), records flushed as chains finish."""

from __future__ import annotations

import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

from anchorgate.anchors import load_library
from anchorgate.assimilator import KnowledgeBase
from anchorgate.errors import AnchorGateError, ConfigError
from anchorgate.gate import GateContext, TestHarness, TestRunner
from anchorgate.generator import ChatClient, ChatConfig, HttpGenerator, ScriptedGenerator
from anchorgate.generator.base import Generator
from anchorgate.model import (
    ChainRecord,
    ChainStatus,
    Mode,
    Strategy,
    atomic_write_text,
    dumps_record,
)
from anchorgate.orchestrator.chain import ChainInputs, run_chain
from anchorgate.orchestrator.config import ABLATION_ORDER, RunConfig, config_to_dict
from anchorgate.orchestrator.corpus import Sample, discover, load_tasks
from anchorgate.review import HeuristicReviewer, HttpReviewer, Reviewer
from anchorgate.sast import BuiltinAnalyzer, ExternalAnalyzer

log = logging.getLogger(__name__)

RECORDS_FILE = "records.jsonl"
MANIFEST_FILE = "manifest.json"


def chain_id(sample: Sample, strategy: Strategy, mode: Mode) -> str:
    return f"{sample.sample_id}:{strategy.value}:{mode.value}"


@dataclass
class SuiteResult:
    records: list[ChainRecord]
    skipped: list[tuple[str, str]] = field(default_factory=list)
    failed: list[tuple[str, str]] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.failed and all(r.status is ChainStatus.COMPLETE for r in self.records)


@dataclass
class Backends:
    """Shared, thread-safe collaborators of one suite run."""

    runner: TestRunner = field(default_factory=TestRunner)
    analyzer: object = None
    reviewer: Reviewer | None = None
    generator_factory: Callable[[Sample, Strategy], Generator] | None = None


def make_backends(cfg: RunConfig) -> Backends:
    analyzer = (
        ExternalAnalyzer(cfg.sast_command, timeout_s=cfg.timeout_s)
        if cfg.sast == "external"
        else BuiltinAnalyzer(hygiene_rules=cfg.hygiene_rules)
    )
    client = None
    if cfg.generator == "http" or cfg.reviewer == "http":
        client = ChatClient(ChatConfig(cfg.base_url, cfg.model, cfg.key_env, cfg.temperature, cfg.timeout_s))
    reviewer: Reviewer | None = None
    if cfg.reviewer == "heuristic":
        reviewer = HeuristicReviewer()
    elif cfg.reviewer == "http":
        reviewer = HttpReviewer(client)
    return Backends(analyzer=analyzer, reviewer=reviewer)


def default_generator(cfg: RunConfig, sample: Sample, strategy: Strategy) -> Generator:
    if cfg.generator == "http":
        return HttpGenerator(ChatConfig(cfg.base_url, cfg.model, cfg.key_env, cfg.temperature, cfg.timeout_s))
    scenario = sample.scenario(strategy)
    if scenario is None:
        raise ConfigError(f"{sample.sample_id}: no scripted scenario for {strategy.value}")
    return ScriptedGenerator(scenario)


def _harness(sample: Sample, cfg: RunConfig) -> TestHarness:
    if cfg.test_timeout_s > 0:
        return TestHarness(sample.harness.tests_dir, sample.harness.command, cfg.test_timeout_s)
    return sample.harness


def run_suite(
    corpus: str | Path,
    strategies: list[Strategy] | tuple[Strategy, ...],
    cfg: RunConfig,
    *,
    out_dir: str | Path | None = None,
    backends: Backends | None = None,
) -> SuiteResult:
    """Run every (sample, strategy) chain of ``corpus`` under ``cfg``.

    With ``out_dir`` each finished chain is appended to the record file at
    once; at the end the file is rewritten sorted by chain id so repeated
    runs produce identical bytes.
    """
    samples, skipped = discover(corpus)
    for path, reason in skipped:
        log.warning("skipping sample %s: %s", path, reason)
    if not samples:
        log.warning("corpus %s contains no valid samples", corpus)
    backends = backends or make_backends(cfg)
    library = load_library(critical_selectors=cfg.critical_selectors)
    shared_kb = KnowledgeBase() if cfg.shared_kb else None
    kb_lock = threading.Lock()

    out = Path(out_dir) if out_dir is not None else None
    started = datetime.now(timezone.utc).isoformat()
    records_path = None
    write_lock = threading.Lock()
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        records_path = out / RECORDS_FILE
        records_path.write_text("", encoding="utf-8")

    jobs = [(s, st) for s in samples for st in strategies]
    failed: list[tuple[str, str]] = []

    def one(job: tuple[Sample, Strategy]) -> ChainRecord | None:
        sample, strategy = job
        cid = chain_id(sample, strategy, cfg.mode)
        try:
            factory = backends.generator_factory or (lambda s, st: default_generator(cfg, s, st))
            n = cfg.iterations or sample.iterations
            inputs = ChainInputs(
                chain_id=cid,
                baseline=sample.snapshot(),
                tasks=load_tasks(strategy, sample.category, n),
                category=sample.category,
                generator=factory(sample, strategy),
                gate=GateContext(
                    harness=_harness(sample, cfg), runner=backends.runner, analyzer=backends.analyzer, library=library
                ),
                strategy=strategy,
                sample_id=sample.sample_id,
                reviewer=backends.reviewer,
                kb=shared_kb,
                library=library,
            )
            if shared_kb is not None:
                with kb_lock:
                    record = run_chain(inputs, cfg)
            else:
                record = run_chain(inputs, cfg)
        except AnchorGateError as exc:
            log.error("chain %s failed: %s", cid, exc)
            with write_lock:
                failed.append((cid, f"{type(exc).__name__}: {exc}"))
            return None
        if records_path is not None:
            with write_lock, records_path.open("a", encoding="utf-8") as fh:
                fh.write(dumps_record(record) + "\n")
        return record

    if cfg.parallelism > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
            results = list(pool.map(one, jobs))
    else:
        results = [one(j) for j in jobs]
    records = sorted((r for r in results if r is not None), key=lambda r: r.chain_id)
    result = SuiteResult(records, skipped, sorted(failed))

    if out is not None:
        atomic_write_text(records_path, "".join(dumps_record(r) + "\n" for r in records))
        manifest = {
            "started": started,
            "finished": datetime.now(timezone.utc).isoformat(),
            "corpus": str(corpus),
            "mode": cfg.mode.value,
            "strategies": [s.value for s in strategies],
            "config": config_to_dict(cfg),
            "config_fingerprint": cfg.fingerprint(),
            "chains": {r.chain_id: r.status.value for r in records},
            "failed": dict(result.failed),
            "skipped_samples": dict(skipped),
        }
        atomic_write_text(out / MANIFEST_FILE, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return result


def run_ablation(
    corpus: str | Path,
    strategies: list[Strategy] | tuple[Strategy, ...],
    cfg: RunConfig,
    *,
    out_dir: str | Path | None = None,
    backends: Backends | None = None,
    modes: tuple[Mode, ...] = ABLATION_ORDER,
) -> dict[Mode, SuiteResult]:
    """The five ablation settings in fixed order, each in ``out_dir/<mode>/``."""
    backends = backends or make_backends(cfg)
    results = {}
    for mode in modes:
        sub = Path(out_dir) / mode.value if out_dir is not None else None
        results[mode] = run_suite(corpus, strategies, cfg.with_mode(mode), out_dir=sub, backends=backends)
    return results
