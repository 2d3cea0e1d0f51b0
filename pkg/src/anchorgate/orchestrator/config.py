"""Run configuration: flat ``key = value`` file, environment overrides, flag overrides.

Recognised keys (environment variable ``ANCHORGATE_<KEY>`` in upper case
overrides the file; command-line flags override both)::

    mode             full | anchor_only | gate_only | no_assimilation | baseline |
                     prompt_security | self_refine | post_hoc_sast | test_guard | hybrid_guard
    delta_max        allowed increase of the vulnerability count per step (0)
    epsilon          allowed increase of risk density per step (0.0)
    b_add, b_del     diff budgets in lines (150, 100)
    r_max            attempts per task (3)
    severity_scope   critical_high | all   (vulnerability count used by the gate)
    rho_scope        all | critical_high   (severities entering the risk density)
    iterations       tasks per chain; 0 = sample.meta value or 10
    generator        scripted | http
    sast             builtin | external
    sast_command     external scanner command with {path}
    hygiene_rules    true | false (builtin analyzer also reports bare/empty except)
    reviewer         heuristic | http | none
    parallelism      concurrent chains (1)
    k_lesson, n_lessons, k_downgrade, k_newanchor
    shared_kb        true | false
    critical_selectors  comma-separated anchor selectors/labels promoted to critical
    base_url, model, key_env, temperature, timeout_s   chat backend
    test_timeout_s   override for every sample's test timeout (0 = use sample.meta)

API keys are read only from the environment variable named by ``key_env``.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from anchorgate.errors import ConfigError
from anchorgate.gate import GateConfig
from anchorgate.generator.prompt import SECURITY_GUIDANCE
from anchorgate.model import LAYERS, Mode, Scope
from anchorgate.sast.external import SEMGREP_COMMAND

ENV_PREFIX = "ANCHORGATE_"


@dataclass(frozen=True)
class RunConfig:
    mode: Mode = Mode.FULL
    gate: GateConfig = field(default_factory=GateConfig)
    iterations: int = 0
    generator: str = "scripted"
    sast: str = "builtin"
    sast_command: str = SEMGREP_COMMAND
    hygiene_rules: bool = False
    reviewer: str = "heuristic"
    parallelism: int = 1
    k_lesson: int = 2
    n_lessons: int = 5
    k_downgrade: int = 3
    k_newanchor: int = 2
    shared_kb: bool = False
    critical_selectors: tuple[str, ...] = ()
    base_url: str = ""
    model: str = ""
    key_env: str = "ANCHORGATE_API_KEY"
    temperature: float = 0.7
    timeout_s: float = 120.0
    test_timeout_s: float = 0.0

    def __post_init__(self):
        if self.generator not in ("scripted", "http"):
            raise ConfigError(f"unknown generator {self.generator!r}")
        if self.sast not in ("builtin", "external"):
            raise ConfigError(f"unknown sast backend {self.sast!r}")
        if self.reviewer not in ("heuristic", "http", "none"):
            raise ConfigError(f"unknown reviewer {self.reviewer!r}")
        if self.parallelism < 1 or self.iterations < 0:
            raise ConfigError("parallelism must be >= 1 and iterations >= 0")
        if min(self.k_lesson, self.n_lessons, self.k_downgrade, self.k_newanchor) < 1:
            raise ConfigError("lesson and anchor thresholds must be >= 1")

    def with_mode(self, mode: Mode) -> "RunConfig":
        return dataclasses.replace(self, mode=mode)

    def fingerprint(self) -> str:
        blob = json.dumps(config_to_dict(self), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:12]


_GATE_KEYS = {f.name for f in dataclasses.fields(GateConfig)}
_RUN_KEYS = {f.name for f in dataclasses.fields(RunConfig)} - {"gate"}
KNOWN_KEYS = frozenset(_GATE_KEYS | _RUN_KEYS)


def config_to_dict(cfg: RunConfig) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for f in dataclasses.fields(GateConfig):
        out[f.name] = _plain(getattr(cfg.gate, f.name))
    for name in sorted(_RUN_KEYS):
        out[name] = _plain(getattr(cfg, name))
    return out


def _plain(value: Any) -> Any:
    if isinstance(value, (Mode, Scope)):
        return value.value
    if isinstance(value, tuple):
        return list(value)
    return value


def _coerce(key: str, raw: Any, current: Any) -> Any:
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if isinstance(current, bool):
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(current, Mode):
            return Mode(text.lower())
        if isinstance(current, Scope):
            return Scope(text.lower())
        if isinstance(current, int):
            return int(text)
        if isinstance(current, float):
            return float(text)
        if isinstance(current, tuple):
            return tuple(p.strip() for p in text.split(",") if p.strip())
    except ValueError:
        raise ConfigError(f"invalid value for {key}: {raw!r}") from None
    return text


def read_config_file(path: str | Path) -> dict[str, str]:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string("[run]\n" + Path(path).read_text("utf-8"), source=str(path))
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    values = dict(parser["run"])
    unknown = set(values) - KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return values


def load_config(
    path: str | Path | None = None,
    env: Mapping[str, str] | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> RunConfig:
    """File values, then ``ANCHORGATE_*`` environment values, then ``overrides``."""
    env = os.environ if env is None else env
    merged: dict[str, Any] = {}
    if path is not None:
        merged.update(read_config_file(path))
    for key in KNOWN_KEYS:
        if ENV_PREFIX + key.upper() in env and key != "key_env":
            merged[key] = env[ENV_PREFIX + key.upper()]
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        merged[key] = value

    base = RunConfig()
    gate_kw = {k: _coerce(k, v, getattr(base.gate, k)) for k, v in merged.items() if k in _GATE_KEYS}
    run_kw = {k: _coerce(k, v, getattr(base, k)) for k, v in merged.items() if k in _RUN_KEYS}
    try:
        return RunConfig(gate=GateConfig(**gate_kw), **run_kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# mode matrix
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModeProfile:
    layers: tuple[str, ...] = ()
    mine: bool = False  # anchors mined, shown to the generator and verified
    enforce_anchors: bool = False  # anchor layer runs against the mined spec
    feedback: bool = False  # last counterexample reaches the generator
    assimilate: bool = False  # knowledge base, lessons and anchor feedback
    guidance: str = ""
    self_refine: bool = False

    @property
    def gated(self) -> bool:
        return bool(self.layers)


MODES: dict[Mode, ModeProfile] = {
    Mode.BASELINE: ModeProfile(),
    Mode.PROMPT_SECURITY: ModeProfile(guidance=SECURITY_GUIDANCE),
    Mode.SELF_REFINE: ModeProfile(self_refine=True),
    Mode.ANCHOR_ONLY: ModeProfile(mine=True),
    Mode.GATE_ONLY: ModeProfile(layers=LAYERS),
    Mode.NO_ASSIMILATION: ModeProfile(layers=LAYERS, mine=True, enforce_anchors=True),
    Mode.FULL: ModeProfile(layers=LAYERS, mine=True, enforce_anchors=True, feedback=True, assimilate=True),
    Mode.TEST_GUARD: ModeProfile(layers=("correctness",), feedback=True),
    Mode.POST_HOC_SAST: ModeProfile(layers=("safety",), feedback=True),
    Mode.HYBRID_GUARD: ModeProfile(layers=("correctness", "safety"), feedback=True),
}

ABLATION_ORDER = (Mode.BASELINE, Mode.ANCHOR_ONLY, Mode.GATE_ONLY, Mode.NO_ASSIMILATION, Mode.FULL)
