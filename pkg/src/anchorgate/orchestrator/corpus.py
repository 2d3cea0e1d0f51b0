"""Corpus layout, sample loading and task scripts.

A sample is a directory holding ``code.py`` or ``code.java``, a ``tests/``
directory and a ``sample.meta`` file of ``key = value`` lines::

    id = db-users             # optional, defaults to the directory name
    category = database       # one of the six task categories
    test_command = {python} -S -m unittest discover -s tests -q
    timeout_s = 30            # optional
    iterations = 10           # optional, tasks per chain

Scripted scenarios live in ``scenarios/<strategy>.yaml`` with
``scenarios/default.yaml`` as the fallback.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import yaml

from anchorgate.errors import ConfigError, UnsupportedLanguage
from anchorgate.gate import TestHarness
from anchorgate.generator.scripted import Scenario
from anchorgate.model import Category, CodeSnapshot, Language, RefinementTask, Strategy

DEFAULT_ITERATIONS = 10


@dataclass(frozen=True)
class Sample:
    sample_id: str
    path: Path
    category: Category
    language: Language
    code_path: Path
    harness: TestHarness
    iterations: int = DEFAULT_ITERATIONS
    meta: dict[str, str] = field(default_factory=dict)

    def snapshot(self) -> CodeSnapshot:
        return CodeSnapshot(self.code_path.read_text("utf-8"), self.language, 0)

    def scenario_path(self, strategy: Strategy) -> Path | None:
        for name in (f"{strategy.value}.yaml", "default.yaml"):
            candidate = self.path / "scenarios" / name
            if candidate.is_file():
                return candidate
        return None

    def scenario(self, strategy: Strategy) -> Scenario | None:
        path = self.scenario_path(strategy)
        return Scenario.load(path) if path else None


def read_meta(path: Path) -> dict[str, str]:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string("[meta]\n" + path.read_text("utf-8"), source=str(path))
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"unreadable sample.meta: {exc}") from None
    return dict(parser["meta"])


def load_sample(path: str | Path) -> Sample:
    root = Path(path)
    meta_path = root / "sample.meta"
    if not meta_path.is_file():
        raise ConfigError(f"{root}: missing sample.meta")
    meta = read_meta(meta_path)
    codes = sorted(p for p in root.glob("code.*") if p.is_file())
    if len(codes) != 1:
        raise ConfigError(f"{root}: expected exactly one code.<ext> file, found {len(codes)}")
    try:
        language = Language.from_path(codes[0])
        category = Category(meta["category"].strip().lower())
        command = meta["test_command"].strip()
        timeout = float(meta.get("timeout_s", "30"))
        iterations = int(meta.get("iterations", str(DEFAULT_ITERATIONS)))
    except KeyError as exc:
        raise ConfigError(f"{meta_path}: missing key {exc}") from None
    except (ValueError, UnsupportedLanguage) as exc:
        raise ConfigError(f"{meta_path}: {exc}") from None
    if not command:
        raise ConfigError(f"{meta_path}: empty test_command")
    if not (root / "tests").is_dir():
        raise ConfigError(f"{root}: missing tests/ directory")
    if iterations < 1 or timeout <= 0:
        raise ConfigError(f"{meta_path}: iterations and timeout_s must be positive")
    return Sample(
        sample_id=meta.get("id", root.name).strip() or root.name,
        path=root,
        category=category,
        language=language,
        code_path=codes[0],
        harness=TestHarness(root / "tests", command, timeout),
        iterations=iterations,
        meta=meta,
    )


def discover(corpus: str | Path) -> tuple[list[Sample], list[tuple[str, str]]]:
    """Valid samples under ``corpus`` (sorted by id) and (path, reason) for the rest."""
    root = Path(corpus)
    if not root.is_dir():
        raise ConfigError(f"corpus directory not found: {root}")
    samples, problems = [], []
    dirs = sorted({p.parent for p in root.rglob("sample.meta")} | {p.parent for p in root.rglob("code.*")})
    for d in dirs:
        if any(part == "scenarios" or part == "tests" for part in d.relative_to(root).parts):
            continue
        try:
            samples.append(load_sample(d))
        except ConfigError as exc:
            problems.append((str(d), str(exc)))
    ids = [s.sample_id for s in samples]
    dupes = {i for i in ids if ids.count(i) > 1}
    if dupes:
        raise ConfigError(f"duplicate sample ids: {', '.join(sorted(dupes))}")
    return sorted(samples, key=lambda s: s.sample_id), problems


def bundled_corpus(name: str = "standard") -> Path:
    """Path of a corpus shipped with the package (``standard`` or ``adversarial``)."""
    path = Path(str(resources.files("anchorgate").joinpath("corpus", name)))
    if not path.is_dir():
        raise ConfigError(f"no bundled corpus named {name!r}")
    return path


@lru_cache(maxsize=1)
def _task_data() -> dict:
    return yaml.safe_load(resources.files("anchorgate").joinpath("data/tasks.yaml").read_text("utf-8"))


def load_tasks(strategy: Strategy, category: Category, n: int = DEFAULT_ITERATIONS) -> list[RefinementTask]:
    data = _task_data()
    templates = data["strategies"][strategy.value]
    focus = data["focus"][category.value]
    return [
        RefinementTask(templates[i % len(templates)].format(focus=focus), strategy, category) for i in range(n)
    ]
