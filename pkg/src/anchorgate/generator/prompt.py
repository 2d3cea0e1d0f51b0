"""Prompt construction for the implementer model.

The template reconstructs the ingredients the method calls for (task, hard
anchors with a do-not-remove instruction, lessons, last counterexample);
it is not a published prompt.
"""

from __future__ import annotations

from anchorgate.assimilator import N_LESSONS, retrieve_lessons
from anchorgate.generator.base import GenerationRequest
from anchorgate.model import CodeSnapshot, LockLevel

SECURITY_GUIDANCE = (
    "Security requirements: validate all external input, keep SQL queries parameterized, "
    "never weaken exception handling, keep permission checks in front of privileged operations, "
    "normalize file paths, and use the secrets module for tokens."
)

CRITIQUE_INSTRUCTION = (
    "Review the candidate below for bugs and security weaknesses introduced by the change. "
    "List concrete problems with line numbers, or reply 'no issues'."
)

ANSWER_INSTRUCTION = "Return the complete updated program in exactly one fenced code block and nothing else."


def anchor_section(req: GenerationRequest) -> str:
    hard = [a for a in req.spec.anchors if a.lock_level is LockLevel.HARD]
    if not hard:
        return ""
    lines = ["Protected security anchors. Do not remove, rename or weaken any of these:"]
    for a in hard:
        note = f"  ({a.label})" if a.label and a.label != a.selector else ""
        lines.append(f"- [{a.priority.value}] {a.anchor_type.value}: {a.selector}{note}")
    return "\n".join(lines)


def lesson_section(req: GenerationRequest, limit: int = N_LESSONS) -> str:
    chosen = retrieve_lessons(list(req.lessons), req.task.category, limit=limit)
    if not chosen:
        return ""
    return "\n".join(["Lessons from earlier rejected changes:"] + [f"- {r.text}" for r in chosen])


def render_prompt(req: GenerationRequest, *, n_lessons: int = N_LESSONS) -> str:
    lang = req.current.language.value
    parts = []
    if req.guidance:
        parts.append(req.guidance)
    parts.append(f"You are refining an existing {lang} program.\nTask: {req.task.description}")
    parts.append(f"Current program:\n```{lang}\n{req.current.source}\n```")
    for section in (anchor_section(req), lesson_section(req, n_lessons)):
        if section:
            parts.append(section)
    if req.last_counterexample is not None:
        parts.append("Your previous attempt was rejected:\n" + req.last_counterexample.render())
    if req.critique:
        parts.append("A reviewer raised these points about your previous version:\n" + req.critique)
    parts.append(ANSWER_INSTRUCTION)
    return "\n\n".join(parts) + "\n"


def render_critique_prompt(req: GenerationRequest, candidate: CodeSnapshot) -> str:
    lang = candidate.language.value
    return (
        f"{CRITIQUE_INSTRUCTION}\n\nTask that was implemented: {req.task.description}\n\n"
        f"Candidate:\n```{lang}\n{candidate.source}\n```\n"
    )
