"""LLM agent substrate: reason/act loop, tool dispatch, transcripts.

Backends are pluggable: a scripted stub for tests, a replay backend that
feeds back a recorded transcript (verifying the conversation shape via a
digest), and a live HTTP backend configured externally. Assistant turns
carry fenced action blocks::

    ```tool <name>
    {json args}
    ```

or a terminating::

    ```final
    <payload>
    ```

Transcript files are JSON-lines: a header object with ``model_tag`` and
``format_version``, then one turn per line.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Optional, Sequence

from argus.errors import BackendError, ReplayDivergenceError

TRANSCRIPT_FORMAT_VERSION = "1"

_TOOL_BLOCK = re.compile(r"```tool[ \t]+(\S+)\s*\n(.*?)```", re.DOTALL)
_FINAL_BLOCK = re.compile(r"```final\s*\n(.*?)```", re.DOTALL)


class Role(str, Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"
    TOOL = "tool"


@dataclass(frozen=True)
class ChatTurn:
    role: Role
    content: str
    tool_name: Optional[str] = None
    token_count: int = 0

    def __post_init__(self):
        if self.token_count < 0:
            raise ValueError("token_count must be >= 0")
        if (self.role == Role.TOOL) != (self.tool_name is not None):
            raise ValueError("tool_name present iff role=tool")


def estimate_tokens(text: str) -> int:
    """Whitespace-token estimate, used when a backend reports no counts."""
    return len(text.split())


@dataclass
class Transcript:
    turns: list[ChatTurn] = field(default_factory=list)
    model_tag: str = "unknown"
    estimated: bool = True

    @property
    def total_prompt_tokens(self) -> int:
        return sum(t.token_count for t in self.turns if t.role != Role.ASSISTANT)

    @property
    def total_completion_tokens(self) -> int:
        return sum(t.token_count for t in self.turns if t.role == Role.ASSISTANT)


@dataclass
class AgentOutcome:
    final_payload: str
    steps_taken: int
    budget_exhausted: bool
    transcript: Transcript
    stop_reason: str = "final-answer"  # final-answer | step-exhaustion | token-exhaustion
    token_overshoot: int = 0


@dataclass(frozen=True)
class Budget:
    max_steps: int = 8
    max_tokens: int = 100_000


def shape_digest(turns: Sequence[ChatTurn]) -> str:
    """Digest over the (role, tool name) sequence of a conversation."""
    h = hashlib.sha256()
    for t in turns:
        h.update(t.role.value.encode())
        h.update(b"\0")
        h.update((t.tool_name or "").encode())
        h.update(b"\1")
    return h.hexdigest()


def content_digest(turns: Sequence[ChatTurn]) -> str:
    h = hashlib.sha256()
    for t in turns:
        h.update(t.role.value.encode())
        h.update(b"\0")
        h.update(t.content.encode())
        h.update(b"\1")
    return h.hexdigest()


class LLMBackend:
    """Interface for loop backends."""

    model_tag = "unknown"
    reports_exact_tokens = False

    def complete(self, turns: Sequence[ChatTurn]) -> ChatTurn:
        """Produce the next assistant turn for the given conversation."""
        raise NotImplementedError

    def prompt_token_count(self, turn: ChatTurn, position: int) -> int:
        """Token count to record for a non-assistant turn at ``position``."""
        return estimate_tokens(turn.content)


class ScriptedStubBackend(LLMBackend):
    """Returns canned assistant responses in order; repeats the last one."""

    model_tag = "stub"

    def __init__(self, responses: Sequence[str]):
        if not responses:
            raise ValueError("stub backend needs at least one response")
        self.responses = list(responses)
        self._i = 0

    def complete(self, turns: Sequence[ChatTurn]) -> ChatTurn:
        text = self.responses[min(self._i, len(self.responses) - 1)]
        self._i += 1
        return ChatTurn(Role.ASSISTANT, text, token_count=estimate_tokens(text))


class ReplayBackend(LLMBackend):
    """Feeds back the assistant turns of a recorded transcript.

    Before each assistant turn is released, the live conversation's shape
    digest must match the recorded prefix; strict mode compares full
    content as well. Recorded token counts are reused for every turn so a
    replayed run reproduces the original accounting exactly.
    """

    reports_exact_tokens = True

    def __init__(self, recorded: Transcript, *, strict: bool = False):
        self.recorded = recorded
        self.strict = strict
        self.model_tag = recorded.model_tag
        self._assistant_positions = [
            i for i, t in enumerate(recorded.turns) if t.role == Role.ASSISTANT
        ]
        self._next = 0

    def complete(self, turns: Sequence[ChatTurn]) -> ChatTurn:
        if self._next >= len(self._assistant_positions):
            raise ReplayDivergenceError(
                "replay exhausted: live loop requested more assistant turns "
                f"than the {len(self._assistant_positions)} recorded"
            )
        pos = self._assistant_positions[self._next]
        recorded_prefix = self.recorded.turns[:pos]
        if shape_digest(turns) != shape_digest(recorded_prefix):
            raise ReplayDivergenceError(
                f"replay divergence before assistant turn {self._next}: "
                "conversation shape differs from recording"
            )
        if self.strict and content_digest(turns) != content_digest(recorded_prefix):
            raise ReplayDivergenceError(
                f"replay divergence before assistant turn {self._next}: "
                "prompt content differs from recording (strict mode)"
            )
        self._next += 1
        return self.recorded.turns[pos]

    def prompt_token_count(self, turn: ChatTurn, position: int) -> int:
        if position < len(self.recorded.turns):
            recorded = self.recorded.turns[position]
            if recorded.role == turn.role:
                return recorded.token_count
        return estimate_tokens(turn.content)


class LiveHttpBackend(LLMBackend):
    """Minimal chat-completions client; endpoint and key are configuration.

    The API key is read from the named environment variable at call time;
    no key material is ever persisted.
    """

    def __init__(self, endpoint: str, model: str, api_key_env: str = "ARGUS_API_KEY",
                 timeout: float = 60.0):
        self.endpoint = endpoint
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.model_tag = model
        self.reports_exact_tokens = True
        self._last_usage: dict[str, int] = {}

    def complete(self, turns: Sequence[ChatTurn]) -> ChatTurn:
        import os

        import requests

        key = os.environ.get(self.api_key_env)
        if not key:
            raise BackendError(f"environment variable {self.api_key_env} is not set")
        messages = [
            {"role": t.role.value, "content": t.content} for t in turns
        ]
        try:
            resp = requests.post(
                self.endpoint,
                json={"model": self.model, "messages": messages},
                headers={"Authorization": f"Bearer {key}"},
                timeout=self.timeout,
            )
            resp.raise_for_status()
            doc = resp.json()
            text = doc["choices"][0]["message"]["content"]
            usage = doc.get("usage", {})
        except Exception as exc:  # noqa: BLE001 - surfaced with partial transcript
            raise BackendError(f"live backend call failed: {exc}") from exc
        self._last_usage = usage
        return ChatTurn(
            Role.ASSISTANT,
            text,
            token_count=int(usage.get("completion_tokens", estimate_tokens(text))),
        )


ToolFn = Callable[[dict], str]


def run_react_loop(
    system_prompt: str,
    task: str,
    tools: Mapping[str, ToolFn],
    backend: LLMBackend,
    budget: Budget = Budget(),
) -> AgentOutcome:
    """Alternate reasoning and tool execution until a final answer.

    Each assistant turn is scanned for a tool block (dispatched, with the
    result appended as a tool turn) or a final block (ends the loop). The
    loop also ends on step or token exhaustion; the outcome records which,
    and any token overshoot from the last turn is recorded rather than
    silently truncated.
    """
    transcript = Transcript(model_tag=backend.model_tag,
                            estimated=not backend.reports_exact_tokens)
    turns = transcript.turns

    def append(turn: ChatTurn):
        if turn.role != Role.ASSISTANT:
            turn = ChatTurn(
                turn.role, turn.content, turn.tool_name,
                backend.prompt_token_count(turn, len(turns)),
            )
        turns.append(turn)

    append(ChatTurn(Role.SYSTEM, system_prompt))
    append(ChatTurn(Role.USER, task))

    def total_tokens() -> int:
        return transcript.total_prompt_tokens + transcript.total_completion_tokens

    steps = 0
    while steps < budget.max_steps:
        steps += 1
        try:
            assistant = backend.complete(turns)
        except BackendError:
            raise
        turns.append(assistant)

        if total_tokens() > budget.max_tokens:
            return AgentOutcome(
                final_payload="",
                steps_taken=steps,
                budget_exhausted=True,
                transcript=transcript,
                stop_reason="token-exhaustion",
                token_overshoot=total_tokens() - budget.max_tokens,
            )

        final = _FINAL_BLOCK.search(assistant.content)
        if final:
            return AgentOutcome(
                final_payload=final.group(1).strip(),
                steps_taken=steps,
                budget_exhausted=False,
                transcript=transcript,
            )
        tool = _TOOL_BLOCK.search(assistant.content)
        if tool:
            name, raw_args = tool.group(1), tool.group(2)
            fn = tools.get(name)
            if fn is None:
                result = f"error: unknown tool {name!r}"
            else:
                try:
                    args = json.loads(raw_args) if raw_args.strip() else {}
                    result = fn(args)
                except Exception as exc:  # noqa: BLE001 - reported back to the agent
                    result = f"error: tool {name!r} failed: {exc}"
            append(ChatTurn(Role.TOOL, result, tool_name=name))
        # A turn with neither block is reasoning only; keep looping until
        # the budget runs out.

    return AgentOutcome(
        final_payload="",
        steps_taken=steps,
        budget_exhausted=True,
        transcript=transcript,
        stop_reason="step-exhaustion",
    )


# ---------------------------------------------------------------------------
# Transcript persistence


def save_transcript(transcript: Transcript, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({
            "format_version": TRANSCRIPT_FORMAT_VERSION,
            "model_tag": transcript.model_tag,
        }) + "\n")
        for t in transcript.turns:
            fh.write(json.dumps({
                "role": t.role.value,
                "content": t.content,
                "tool_name": t.tool_name,
                "token_count": t.token_count,
            }) + "\n")


def load_transcript(path) -> Transcript:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line for line in fh if line.strip()]
    if not lines:
        raise BackendError(f"{path}: empty transcript file")
    header = json.loads(lines[0])
    if header.get("format_version") != TRANSCRIPT_FORMAT_VERSION:
        raise BackendError(f"{path}: unsupported transcript format_version")
    turns = []
    for line in lines[1:]:
        raw = json.loads(line)
        turns.append(ChatTurn(
            role=Role(raw["role"]),
            content=raw["content"],
            tool_name=raw.get("tool_name"),
            token_count=int(raw.get("token_count", 0)),
        ))
    return Transcript(turns=turns, model_tag=header.get("model_tag", "unknown"),
                      estimated=False)


# ---------------------------------------------------------------------------
# Token metering


@dataclass
class TokenUsage:
    per_stage: dict[str, tuple[int, int]] = field(default_factory=dict)

    @property
    def total_prompt(self) -> int:
        return sum(p for p, _ in self.per_stage.values())

    @property
    def total_completion(self) -> int:
        return sum(c for _, c in self.per_stage.values())

    @property
    def grand_total(self) -> int:
        return self.total_prompt + self.total_completion

    def to_dict(self) -> dict:
        return {
            "per_stage": {
                stage: {"prompt": p, "completion": c}
                for stage, (p, c) in sorted(self.per_stage.items())
            },
            "total_prompt": self.total_prompt,
            "total_completion": self.total_completion,
            "grand_total": self.grand_total,
        }


def meter_tokens(stage_transcripts: Mapping[str, Sequence[Transcript]]) -> TokenUsage:
    """Summarize prompt/completion counts per stage; totals are the sums."""
    usage = TokenUsage()
    for stage, transcripts in stage_transcripts.items():
        prompt = sum(t.total_prompt_tokens for t in transcripts)
        completion = sum(t.total_completion_tokens for t in transcripts)
        usage.per_stage[stage] = (prompt, completion)
    return usage
