"""Chat-completion gateway with a live HTTP backend and a scripted one.

The scripted backend replays fixed assistant responses in order, optionally
verifying substring predicates against the incoming conversation. It is the
workhorse for hermetic tests and golden-transcript replay.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Optional, Protocol

import requests

logger = logging.getLogger(__name__)

ENDPOINT_ENV = "RAIDER_LLM_URL"
API_KEY_ENV = "RAIDER_LLM_API_KEY"


@dataclass(frozen=True)
class ChatMessage:
    role: str  # system | user | assistant; tool results travel as user
    content: str

    def __post_init__(self) -> None:
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"invalid role {self.role!r}")

    def to_dict(self) -> dict:
        return {"role": self.role, "content": self.content}


@dataclass
class ChatConfig:
    backend: str = "scripted"  # scripted | live
    model: str = "gpt-4o"
    temperature: float = 0.0
    timeout: float = 30.0
    max_retries: int = 2

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


class GatewayError(RuntimeError):
    """Transport failure, script exhaustion, or predicate mismatch."""


class ChatBackend(Protocol):
    def complete(self, messages: list[ChatMessage], config: ChatConfig) -> ChatMessage: ...


def _check_preconditions(messages: list[ChatMessage]) -> None:
    if not messages:
        raise GatewayError("messages must be non-empty")
    if messages[0].role != "system":
        raise GatewayError("first message must be a system message")


@dataclass
class ScriptedStep:
    response: str
    # Substrings that must all appear somewhere in the incoming conversation.
    expect: list[str] = field(default_factory=list)
    delay: float = 0.0


class ScriptedBackend:
    """Deterministic backend: responses consumed strictly in order."""

    def __init__(self, steps: list[ScriptedStep | str], cycle: bool = False):
        self.steps = [s if isinstance(s, ScriptedStep) else ScriptedStep(s) for s in steps]
        self.cycle = cycle
        self.cursor = 0

    @classmethod
    def from_texts(cls, responses: list[str], cycle: bool = False) -> "ScriptedBackend":
        return cls(list(responses), cycle=cycle)

    def complete(self, messages: list[ChatMessage], config: ChatConfig) -> ChatMessage:
        _check_preconditions(messages)
        if self.cursor >= len(self.steps):
            if not self.cycle:
                raise GatewayError(
                    f"scripted backend exhausted after {len(self.steps)} responses"
                )
            self.cursor = 0
        step = self.steps[self.cursor]
        haystack = "\n".join(m.content for m in messages)
        for needle in step.expect:
            if needle not in haystack:
                raise GatewayError(
                    f"scripted step {self.cursor}: expected substring {needle!r} "
                    "not found in conversation"
                )
        self.cursor += 1
        if step.delay > 0:
            import time

            time.sleep(step.delay)
        return ChatMessage("assistant", step.response)


class HttpBackend:
    """Chat-completions style HTTP endpoint (URL and key from env/config)."""

    def __init__(self, url: Optional[str] = None, api_key: Optional[str] = None):
        self.url = url or os.environ.get(ENDPOINT_ENV, "")
        self.api_key = api_key or os.environ.get(API_KEY_ENV, "")

    def complete(self, messages: list[ChatMessage], config: ChatConfig) -> ChatMessage:
        _check_preconditions(messages)
        if not self.url:
            raise GatewayError(f"no endpoint configured (set {ENDPOINT_ENV})")
        body = {
            "model": config.model,
            "temperature": config.temperature,
            "messages": [m.to_dict() for m in messages],
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Optional[Exception] = None
        for attempt in range(1 + config.max_retries):
            if attempt:
                logger.warning("retrying chat completion (attempt %d): %s", attempt + 1, last_error)
            try:
                resp = requests.post(
                    self.url, json=body, headers=headers, timeout=config.timeout
                )
                if resp.status_code != 200:
                    raise GatewayError(f"HTTP {resp.status_code}: {resp.text[:200]}")
                data = resp.json()
                content = data["choices"][0]["message"]["content"]
                return ChatMessage("assistant", content)
            except (requests.RequestException, KeyError, json.JSONDecodeError, GatewayError) as exc:
                last_error = exc
        raise GatewayError(f"chat completion failed after retries: {last_error}")


def complete(messages: list[ChatMessage], config: ChatConfig,
             backend: ChatBackend) -> ChatMessage:
    """Blocking completion through the given backend."""
    return backend.complete(messages, config)
