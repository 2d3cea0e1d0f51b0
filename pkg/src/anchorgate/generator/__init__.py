"""Candidate generators: scripted scenarios for tests, chat completion for live runs."""

from anchorgate.generator.base import GenerationRequest, Generator
from anchorgate.generator.http import ChatClient, ChatConfig, HttpGenerator, extract_code_block
from anchorgate.generator.prompt import SECURITY_GUIDANCE, render_critique_prompt, render_prompt
from anchorgate.generator.scripted import Scenario, ScenarioStep, ScriptedGenerator, Variant

__all__ = [
    "ChatClient",
    "ChatConfig",
    "GenerationRequest",
    "Generator",
    "HttpGenerator",
    "SECURITY_GUIDANCE",
    "Scenario",
    "ScenarioStep",
    "ScriptedGenerator",
    "Variant",
    "extract_code_block",
    "render_critique_prompt",
    "render_prompt",
]
