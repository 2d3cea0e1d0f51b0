"""Loader for the anchor-mining data file."""

from __future__ import annotations

import fnmatch
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import yaml

from anchorgate.errors import ConfigError
from anchorgate.model import Category, Language, Severity


@dataclass(frozen=True)
class PatternDef:
    name: str
    kind: str  # "regex" | "ast"
    languages: tuple[str, ...]
    pattern: str = ""
    templates: tuple[str, ...] = ()
    priority: Severity = Severity.HIGH
    soft: bool = False


@dataclass(frozen=True)
class InvariantDef:
    id: str
    category: Category
    description: str
    critical: bool = False


@dataclass(frozen=True)
class Library:
    name_rules: dict[str, re.Pattern]
    sinks: dict[str, dict[str, tuple[str, ...]]]
    privileged_ops: re.Pattern
    privileged_checks: re.Pattern
    patterns: tuple[PatternDef, ...]
    invariants: tuple[InvariantDef, ...]
    critical_selectors: frozenset[str] = field(default_factory=frozenset)

    def name_family(self, name: str) -> str | None:
        for family, rx in self.name_rules.items():
            if rx.search(name):
                return family
        return None

    def sink_class(self, call_name: str, language: Language) -> str | None:
        for cls, per_lang in self.sinks.items():
            for glob in per_lang.get(language.value, ()):
                if fnmatch.fnmatchcase(call_name, glob):
                    return cls
        return None

    def patterns_for(self, language: Language) -> list[PatternDef]:
        return [p for p in self.patterns if language.value in p.languages]

    def invariants_for(self, category: Category | None) -> list[InvariantDef]:
        return [inv for inv in self.invariants if inv.category is category]

    def invariant(self, inv_id: str) -> InvariantDef:
        for inv in self.invariants:
            if inv.id == inv_id:
                return inv
        raise KeyError(inv_id)


def load_library(path: str | Path | None = None, critical_selectors=()) -> Library:
    if path is None:
        text = resources.files("anchorgate.anchors").joinpath("data/library.yaml").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    try:
        raw = yaml.safe_load(text)
        patterns = tuple(
            PatternDef(
                name=p["name"],
                kind=p["kind"],
                languages=tuple(p.get("languages", ["python"])),
                pattern=p.get("pattern", ""),
                templates=tuple(p.get("templates", ())),
                priority=Severity(p.get("priority", "high")),
                soft=bool(p.get("soft", False)),
            )
            for p in raw.get("patterns", [])
        )
        for p in patterns:
            if p.kind == "regex":
                re.compile(p.pattern)
            elif p.kind != "ast":
                raise ConfigError(f"unknown pattern kind {p.kind!r}")
        return Library(
            name_rules={k: re.compile(v) for k, v in raw["name_rules"].items()},
            sinks={k: {lang: tuple(g) for lang, g in v.items()} for k, v in raw["sinks"].items()},
            privileged_ops=re.compile(raw["privileged"]["operations"]),
            privileged_checks=re.compile(raw["privileged"]["checks"]),
            patterns=patterns,
            invariants=tuple(
                InvariantDef(i["id"], Category(i["category"]), i["description"], bool(i.get("critical", False)))
                for i in raw.get("invariants", [])
            ),
            critical_selectors=frozenset(critical_selectors),
        )
    except (KeyError, TypeError, ValueError, re.error, yaml.YAMLError) as exc:
        raise ConfigError(f"invalid anchor library: {exc}") from exc


@lru_cache(maxsize=1)
def default_library() -> Library:
    return load_library()
