"""Chat-completion HTTP backend (OpenAI-style message lists)."""

from __future__ import annotations

import os
import re
from dataclasses import dataclass

import httpx

from anchorgate.errors import ConfigError, GenerationUnavailable, MalformedCompletion
from anchorgate.generator.base import GenerationRequest
from anchorgate.generator.prompt import render_critique_prompt, render_prompt
from anchorgate.model import CodeSnapshot, MigrationRequest

SYSTEM_PROMPT = "You are a careful software engineer who edits code without weakening its security."
_FENCE = re.compile(r"```[^\n`]*\n(.*?)```", re.S)


@dataclass(frozen=True)
class ChatConfig:
    base_url: str
    model: str
    key_env: str = "ANCHORGATE_API_KEY"
    temperature: float = 0.7
    timeout_s: float = 120.0


class ChatClient:
    """Sends one message list and returns the first choice's content."""

    def __init__(self, cfg: ChatConfig, transport: httpx.BaseTransport | None = None):
        if not cfg.base_url or not cfg.model:
            raise ConfigError("chat backend needs base_url and model")
        self.cfg = cfg
        self._transport = transport

    def complete(self, messages: list[dict[str, str]]) -> str:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.cfg.key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        body = {"model": self.cfg.model, "messages": messages, "temperature": self.cfg.temperature}
        url = self.cfg.base_url.rstrip("/") + "/chat/completions"
        try:
            with httpx.Client(timeout=self.cfg.timeout_s, transport=self._transport) as client:
                resp = client.post(url, json=body, headers=headers)
        except httpx.TimeoutException as exc:
            raise GenerationUnavailable(f"chat request timed out: {exc}", retryable=True) from None
        except httpx.HTTPError as exc:
            raise GenerationUnavailable(f"chat endpoint unreachable: {exc}", retryable=True) from None
        if resp.status_code >= 400:
            retryable = resp.status_code == 429 or resp.status_code >= 500
            raise GenerationUnavailable(f"chat endpoint returned {resp.status_code}", retryable=retryable)
        try:
            return str(resp.json()["choices"][0]["message"]["content"])
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise GenerationUnavailable(f"unexpected chat response shape: {exc}", retryable=False) from None


def extract_code_block(reply: str) -> str:
    blocks = _FENCE.findall(reply)
    if len(blocks) != 1:
        raise MalformedCompletion(f"expected exactly one fenced code block, found {len(blocks)}")
    return blocks[0]


class HttpGenerator:
    name = "http"

    def __init__(self, cfg: ChatConfig, transport: httpx.BaseTransport | None = None):
        self.client = ChatClient(cfg, transport)

    def generate(self, req: GenerationRequest) -> CodeSnapshot:
        reply = self.client.complete(
            [{"role": "system", "content": SYSTEM_PROMPT}, {"role": "user", "content": render_prompt(req)}]
        )
        return CodeSnapshot(extract_code_block(reply), req.current.language, req.iteration)

    def critique(self, req: GenerationRequest, candidate: CodeSnapshot) -> str:
        return self.client.complete(
            [
                {"role": "system", "content": SYSTEM_PROMPT},
                {"role": "user", "content": render_critique_prompt(req, candidate)},
            ]
        )

    def migrations(self, req: GenerationRequest) -> list[MigrationRequest]:
        return []
