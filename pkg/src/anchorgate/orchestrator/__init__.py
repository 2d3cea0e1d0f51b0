"""Chain and suite orchestration."""

from anchorgate.orchestrator.chain import ChainInputs, run_chain
from anchorgate.orchestrator.config import ABLATION_ORDER, MODES, ModeProfile, RunConfig, load_config
from anchorgate.orchestrator.corpus import Sample, bundled_corpus, discover, load_sample, load_tasks
from anchorgate.orchestrator.suite import Backends, SuiteResult, chain_id, make_backends, run_ablation, run_suite

__all__ = [
    "ABLATION_ORDER",
    "Backends",
    "ChainInputs",
    "MODES",
    "ModeProfile",
    "RunConfig",
    "Sample",
    "SuiteResult",
    "bundled_corpus",
    "chain_id",
    "discover",
    "load_config",
    "load_sample",
    "load_tasks",
    "make_backends",
    "run_ablation",
    "run_chain",
    "run_suite",
]
