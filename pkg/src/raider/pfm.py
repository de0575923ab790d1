"""Program Flow Manager: the regulated loop between the model and the tools.

Each iteration sends the conversation to the gateway, parses tool calls and
a possible final response out of the assistant text, executes the calls,
and appends warnings when the model misbehaves. The loop ends on a final
response with no pending calls, or on the deadline.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from .gateway import ChatBackend, ChatConfig, ChatMessage, GatewayError
from .prompts import PromptConfig, build_system_prompt, build_user_message
from .scene import Scene
from .tools import ToolCall, ToolRegistry

DEFAULT_DEADLINE_SECONDS = 20.0
DEFAULT_ITERATION_CAP = 12


class WarningKind(Enum):
    MADE_UP_TOOL_RESPONSE = "Made up Tool Response"
    MADE_UP_TOOL_NAME = "Made up Tool Name"
    UNSUCCESSFUL_TOOL_CALL = "Unsuccessful Tool Call"
    MISSING_TOOL_CALL_OR_FINAL_RESPONSE = "Missing Tool Call or Final Response"


_WARNING_NUMBER = {
    WarningKind.MADE_UP_TOOL_RESPONSE: 1,
    WarningKind.MADE_UP_TOOL_NAME: 2,
    WarningKind.UNSUCCESSFUL_TOOL_CALL: 3,
    WarningKind.MISSING_TOOL_CALL_OR_FINAL_RESPONSE: 4,
}


def warning_message(kind: WarningKind, detail: str = "") -> str:
    number = _WARNING_NUMBER[kind]
    text = f"Warning {number}: {kind.value}."
    if detail:
        text += f" {detail}"
    return text


OUTCOME_LABELS = ("ambiguity", "unfeasibility", "no_issue", "timeout", "transport_failure")

_LABEL_ALIASES = {
    "ambiguity": "ambiguity",
    "unfeasibility": "unfeasibility",
    "unfeasible": "unfeasibility",
    "no_issue": "no_issue",
    "no issue": "no_issue",
    "noissue": "no_issue",
    "none": "no_issue",
}


@dataclass
class ConversationLog:
    """Append-only ordered message log; warnings and tool results included."""

    messages: list[ChatMessage] = field(default_factory=list)

    def append(self, message: ChatMessage) -> None:
        self.messages.append(message)

    def to_list(self) -> list[dict]:
        return [m.to_dict() for m in self.messages]


@dataclass
class AgentOutcome:
    label: str
    explanation: str
    log: ConversationLog
    iterations: int = 0
    tool_call_count: int = 0
    warnings: dict[str, int] = field(default_factory=dict)
    elapsed_seconds: float = 0.0
    grounding_trace: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "explanation": self.explanation,
            "stats": {
                "iterations": self.iterations,
                "tool_calls": self.tool_call_count,
                "warnings": dict(self.warnings),
                "elapsed_seconds": self.elapsed_seconds,
                "grounding_trace": list(self.grounding_trace),
            },
            "log": self.log.to_list(),
        }


# -- parsing ----------------------------------------------------------------

_CALL_MARKER = re.compile(r"call_tool\s*\{")
_KEY_VALUE = re.compile(
    r"""["']?(?P<key>tool|args)["']?\s*:\s*"""
    r"""(?P<value>"[^"]*"|'[^']*'|\[[^\]]*\]|[^,}]+)""",
    re.VERBOSE,
)


def _find_balanced(text: str, open_index: int) -> Optional[int]:
    """Index just past the brace matching text[open_index] ('{' or '['), or None."""
    opener = text[open_index]
    closer = {"{": "}", "[": "]"}[opener]
    depth = 0
    in_string: Optional[str] = None
    for i in range(open_index, len(text)):
        ch = text[i]
        if in_string:
            if ch == in_string and text[i - 1] != "\\":
                in_string = None
            continue
        if ch in "\"'":
            in_string = ch
        elif ch == opener:
            depth += 1
        elif ch == closer:
            depth -= 1
            if depth == 0:
                return i + 1
    return None


def _strip_quotes(token: str) -> str:
    token = token.strip()
    if len(token) >= 2 and token[0] == token[-1] and token[0] in "\"'":
        return token[1:-1]
    return token


def _parse_arg_list(raw: str) -> Optional[list[str]]:
    raw = raw.strip()
    if not (raw.startswith("[") and raw.endswith("]")):
        return None
    inner = raw[1:-1].strip()
    if not inner:
        return []
    args: list[str] = []
    buf = ""
    in_string: Optional[str] = None
    for ch in inner:
        if in_string:
            if ch == in_string:
                in_string = None
            else:
                buf += ch
            continue
        if ch in "\"'":
            in_string = ch
        elif ch in "[]":
            return None  # nested lists are not part of the grammar
        elif ch == ",":
            args.append(buf.strip())
            buf = ""
        else:
            buf += ch
    if in_string is not None:
        return None
    args.append(buf.strip())
    if any(a == "" for a in args):
        return None  # empty element (e.g. trailing comma)
    return args


def parse_tool_calls(text: str) -> list[ToolCall]:
    """All call_tool{...} expressions, in order of appearance.

    Accepts bare or quoted keys, single or double quotes, and a bracketed
    argument list. A matched ``call_tool{`` prefix with a malformed or
    unbalanced body is recorded as a parse-failure call.
    """
    calls: list[ToolCall] = []
    for match in _CALL_MARKER.finditer(text):
        open_index = text.index("{", match.start())
        end = _find_balanced(text, open_index)
        if end is None:
            calls.append(
                ToolCall("", [], (match.start(), len(text)), parse_error="unbalanced braces")
            )
            continue
        body = text[open_index + 1 : end - 1]
        tool: Optional[str] = None
        args: Optional[list[str]] = None
        for kv in _KEY_VALUE.finditer(body):
            key = kv.group("key")
            value = kv.group("value").strip()
            if key == "tool":
                tool = _strip_quotes(value)
            elif key == "args":
                args = _parse_arg_list(value)
        span = (match.start(), end)
        if not tool:
            calls.append(ToolCall("", [], span, parse_error="missing tool name"))
        elif args is None:
            calls.append(ToolCall(tool, [], span, parse_error="malformed args list"))
        else:
            calls.append(ToolCall(tool, args, span))
    return calls


def parse_final_response(text: str) -> Optional[tuple[str, str]]:
    """(label, explanation) from a balanced JSON-ish object, or None.

    Labels are normalized case-insensitively; unrecognized labels are
    treated as absent.
    """
    search_from = 0
    while True:
        key_index = text.find("final_response", search_from)
        if key_index < 0:
            return None
        open_index = text.rfind("{", 0, key_index)
        if open_index < 0:
            search_from = key_index + 1
            continue
        end = _find_balanced(text, open_index)
        if end is None:
            search_from = key_index + 1
            continue
        candidate = text[open_index:end]
        label, explanation = _extract_final_fields(candidate)
        if label is not None:
            normalized = _LABEL_ALIASES.get(label.strip().lower().replace("-", " "))
            if normalized is None:
                normalized = _LABEL_ALIASES.get(
                    label.strip().lower().replace(" ", "_").replace("-", "_")
                )
            if normalized:
                return normalized, explanation
        search_from = max(end, key_index + 1)


def _extract_final_fields(candidate: str) -> tuple[Optional[str], str]:
    try:
        obj = json.loads(candidate)
        if isinstance(obj, dict) and "final_response" in obj:
            return str(obj["final_response"]), str(obj.get("explanation", "") or "")
    except json.JSONDecodeError:
        pass
    label_match = re.search(r"""["']?final_response["']?\s*:\s*("[^"]*"|'[^']*')""", candidate)
    if not label_match:
        return None, ""
    expl_match = re.search(r"""["']?explanation["']?\s*:\s*("[^"]*"|'[^']*')""", candidate)
    explanation = _strip_quotes(expl_match.group(1)) if expl_match else ""
    return _strip_quotes(label_match.group(1)), explanation


# -- run loop ----------------------------------------------------------------


@dataclass
class RunConfig:
    prompt: PromptConfig = field(default_factory=PromptConfig)
    chat: ChatConfig = field(default_factory=ChatConfig)
    deadline_seconds: float = DEFAULT_DEADLINE_SECONDS
    iteration_cap: int = DEFAULT_ITERATION_CAP


def run(
    query: str,
    scene: Scene,
    registry: ToolRegistry,
    backend: ChatBackend,
    config: Optional[RunConfig] = None,
    observer: Optional[Callable[[str, dict], None]] = None,
    on_iteration: Optional[Callable[[], None]] = None,
) -> AgentOutcome:
    """Execute one detection run and return the outcome with its full log.

    `observer(kind, payload)` receives live events (llm_message, tool_call,
    tool_result, warning, outcome); `on_iteration` runs before each loop turn,
    giving callers a safe point to apply queued scene mutations.
    """
    config = config or RunConfig()
    profile = registry.profile(config.prompt.profile)
    system_prompt = build_system_prompt(config.prompt, registry.render_tool_descriptions(profile))
    user_message = build_user_message(query, scene.object_ids())

    log = ConversationLog()
    log.append(ChatMessage("system", system_prompt))
    log.append(ChatMessage("user", user_message))

    warnings: dict[str, int] = {}
    grounding: list[str] = []
    tool_call_count = 0
    iterations = 0
    started = time.monotonic()

    def out_of_time() -> bool:
        return time.monotonic() - started > config.deadline_seconds

    def notify(kind: str, payload: dict) -> None:
        if observer is not None:
            observer(kind, payload)

    def add_warning(kind: WarningKind, detail: str = "") -> None:
        warnings[kind.name] = warnings.get(kind.name, 0) + 1
        message = warning_message(kind, detail)
        log.append(ChatMessage("user", message))
        notify("warning", {"kind": kind.name, "message": message})

    def finish(label: str, explanation: str) -> AgentOutcome:
        notify(
            "outcome",
            {
                "label": label,
                "explanation": explanation,
                "iterations": iterations,
                "tool_call_count": tool_call_count,
                "warnings": dict(warnings),
                "elapsed_seconds": time.monotonic() - started,
            },
        )
        return AgentOutcome(
            label=label,
            explanation=explanation,
            log=log,
            iterations=iterations,
            tool_call_count=tool_call_count,
            warnings=warnings,
            elapsed_seconds=time.monotonic() - started,
            grounding_trace=grounding,
        )

    while iterations < config.iteration_cap and not out_of_time():
        iterations += 1
        if on_iteration is not None:
            on_iteration()
        try:
            assistant = backend.complete(log.messages, config.chat)
        except GatewayError as exc:
            log.append(ChatMessage("user", f"Transport failure: {exc}"))
            return finish("transport_failure", str(exc))
        log.append(assistant)
        notify("llm_message", {"role": assistant.role, "content": assistant.content})

        calls = parse_tool_calls(assistant.content)
        final = parse_final_response(assistant.content)

        if calls:
            if final is not None:
                # The final response seen alongside pending calls is discarded:
                # the model may have fabricated the tool responses.
                add_warning(
                    WarningKind.MADE_UP_TOOL_RESPONSE,
                    "A final response was provided alongside pending tool calls; "
                    "it is discarded and the tool calls are executed.",
                )
            for call in calls:
                if call.parse_error is None and not registry.is_registered(call.tool, profile):
                    add_warning(
                        WarningKind.MADE_UP_TOOL_NAME,
                        f"Tool '{call.tool}' is not in the list of available tools.",
                    )
                    continue
                notify("tool_call", {"tool": call.tool, "args": list(call.args)})
                result = registry.invoke(call, scene)
                tool_call_count += 1
                if result.success:
                    grounding.extend(
                        r for r in result.resolved_args if r in scene.objects
                    )
                    log.append(ChatMessage("user", result.render()))
                    notify("tool_result", {"tool": call.tool, "message": result.render()})
                else:
                    add_warning(
                        WarningKind.UNSUCCESSFUL_TOOL_CALL,
                        f"Call to tool '{call.tool or '?'}' failed: {result.value}.",
                    )
            continue

        if final is not None:
            label, explanation = final
            return finish(label, explanation)

        add_warning(
            WarningKind.MISSING_TOOL_CALL_OR_FINAL_RESPONSE,
            "The response contained neither a final response nor correct tool calls; "
            "please provide one of them.",
        )

    return finish("timeout", "")
