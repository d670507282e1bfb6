"""Chat-completion gateway with tool calling.

Four providers share one ``complete(request) -> response`` method:

* :class:`RemoteProvider` speaks the chat-completions wire protocol over HTTP;
* :class:`ScriptedProvider` returns canned messages, for tests and fixtures;
* :class:`RecordingProvider` wraps another provider and appends every
  response to a line-delimited transcript;
* :class:`ReplayProvider` serves a transcript back, checking that each
  request fingerprint matches the recorded one.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Protocol, Sequence, Union

import httpx

from .errors import ProviderError, ReplayMiss
from .tools import ToolCall, ToolSchema

log = logging.getLogger(__name__)

API_KEY_ENV = "CLAIMCHECK_API_KEY"
API_BASE_ENV = "CLAIMCHECK_API_BASE"
DEFAULT_API_BASE = "https://api.openai.com/v1"

ROLES = ("system", "user", "assistant", "tool")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str = ""
    tool_calls: tuple[ToolCall, ...] = ()
    tool_call_id: str | None = None

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if self.role == "tool" and not self.tool_call_id:
            raise ValueError("tool messages require tool_call_id")
        if self.tool_calls and self.role != "assistant":
            raise ValueError("only assistant messages may carry tool calls")

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"role": self.role, "content": self.content}
        if self.tool_calls:
            d["tool_calls"] = [c.to_dict() for c in self.tool_calls]
        if self.tool_call_id is not None:
            d["tool_call_id"] = self.tool_call_id
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ChatMessage":
        return cls(d["role"], d.get("content") or "",
                   tuple(ToolCall.from_dict(c) for c in d.get("tool_calls") or ()),
                   d.get("tool_call_id"))


def system(text: str) -> ChatMessage:
    return ChatMessage("system", text)


def user(text: str) -> ChatMessage:
    return ChatMessage("user", text)


def assistant(text: str = "", *calls: ToolCall) -> ChatMessage:
    return ChatMessage("assistant", text, tuple(calls))


def call(tool: str, _id: str = "", **arguments) -> ToolCall:
    """Build a tool call for scripts; empty ids are filled in by the provider."""
    return ToolCall(_id, tool, arguments)


@dataclass(frozen=True)
class Sampling:
    temperature: float | None = 0.0
    max_output_tokens: int = 4096


@dataclass(frozen=True)
class ModelRequest:
    model_id: str
    messages: tuple[ChatMessage, ...]
    tools: tuple[ToolSchema, ...] = ()
    sampling: Sampling = Sampling()
    agent: str = ""

    def __post_init__(self):
        if not self.messages:
            raise ValueError("request needs at least one message")
        if self.messages[0].role != "system":
            raise ValueError("first message must have the system role")

    def to_dict(self) -> dict:
        return {"agent": self.agent, "model_id": self.model_id,
                "messages": [m.to_dict() for m in self.messages],
                "tools": [t.name for t in self.tools]}


@dataclass(frozen=True)
class Usage:
    input_tokens: int = 0
    output_tokens: int = 0

    def __add__(self, other: "Usage") -> "Usage":
        return Usage(self.input_tokens + other.input_tokens, self.output_tokens + other.output_tokens)

    @property
    def total(self) -> int:
        return self.input_tokens + self.output_tokens

    def to_dict(self) -> dict:
        return {"input_tokens": self.input_tokens, "output_tokens": self.output_tokens}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Usage":
        return cls(int(d.get("input_tokens", 0)), int(d.get("output_tokens", 0)))


@dataclass(frozen=True)
class ModelResponse:
    message: ChatMessage
    usage: Usage = Usage()
    model_id: str = ""

    def __post_init__(self):
        if self.message.role != "assistant":
            raise ValueError("responses must carry an assistant message")

    def to_dict(self) -> dict:
        return {"message": self.message.to_dict(), "usage": self.usage.to_dict(), "model_id": self.model_id}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelResponse":
        return cls(ChatMessage.from_dict(d["message"]), Usage.from_dict(d.get("usage") or {}),
                   d.get("model_id", ""))


class ModelProvider(Protocol):
    def complete(self, request: ModelRequest) -> ModelResponse: ...


def fingerprint(request: ModelRequest) -> str:
    """Stable hash of model id, message roles/contents/tool calls, and tool names.

    Sampling parameters, tool-call ids and the agent label do not contribute.
    """
    payload = {
        "model": request.model_id,
        "messages": [
            [m.role, m.content, [[c.tool, dict(c.arguments), c.malformed] for c in m.tool_calls]]
            for m in request.messages
        ],
        "tools": sorted(t.name for t in request.tools),
    }
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def content_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


# -- scripted ----------------------------------------------------------------

ScriptItem = Union[ChatMessage, ModelResponse, str]


class ScriptMiss(ProviderError):
    pass


class ScriptedProvider:
    """Canned responses keyed on (agent name, hash of the last user message).

    Each key maps to a list of responses; the n-th assistant turn after that
    user message receives the n-th item.  Lookup depends only on the request,
    so identical requests always get identical responses.
    """

    def __init__(self, script: Mapping[tuple[str, str], Sequence[ScriptItem]] = (), *, hashed: bool = False):
        self._script: dict[tuple[str, str], list[ModelResponse]] = {}
        for (agent, text), items in dict(script).items():
            self.add(agent, text, items, hashed=hashed)

    def add(self, agent: str, user_text: str, items: Sequence[ScriptItem], *, hashed: bool = False) -> None:
        key = (agent, user_text if hashed else content_hash(user_text))
        self._script[key] = [_as_response(item) for item in items]

    def complete(self, request: ModelRequest) -> ModelResponse:
        last_user = None
        position = 0
        for m in request.messages:
            if m.role == "user":
                last_user, position = m.content, 0
            elif m.role == "assistant":
                position += 1
        if last_user is None:
            raise ScriptMiss(f"scripted provider: request for {request.agent} has no user message")
        key = (request.agent, content_hash(last_user))
        items = self._script.get(key)
        if items is None:
            raise ScriptMiss(f"scripted provider: no script for agent {request.agent!r} and input "
                             f"{last_user[:80]!r}")
        if position >= len(items):
            raise ScriptMiss(f"scripted provider: script for agent {request.agent!r} has {len(items)} turns, "
                             f"turn {position + 1} requested")
        resp = items[position]
        calls = tuple(c if c.id else ToolCall(f"call_{position}_{j}", c.tool, c.arguments, c.malformed)
                      for j, c in enumerate(resp.message.tool_calls))
        msg = ChatMessage("assistant", resp.message.content, calls)
        return ModelResponse(msg, resp.usage, request.model_id)


def _as_response(item: ScriptItem) -> ModelResponse:
    if isinstance(item, ModelResponse):
        return item
    if isinstance(item, ChatMessage):
        return ModelResponse(item)
    return ModelResponse(ChatMessage("assistant", str(item)))


# -- remote ------------------------------------------------------------------

class MissingCredentials(ProviderError):
    def __init__(self, variable: str):
        super().__init__(f"environment variable {variable} is not set")
        self.variable = variable


def _wire_message(m: ChatMessage) -> dict:
    if m.role == "tool":
        return {"role": "tool", "tool_call_id": m.tool_call_id, "content": m.content}
    d: dict[str, Any] = {"role": m.role, "content": m.content}
    if m.tool_calls:
        d["content"] = m.content or None
        d["tool_calls"] = [
            {"id": c.id, "type": "function",
             "function": {"name": c.tool,
                          "arguments": c.malformed if c.malformed is not None
                          else json.dumps(dict(c.arguments), ensure_ascii=False)}}
            for c in m.tool_calls
        ]
    return d


def _parse_tool_call(raw: dict) -> ToolCall:
    fn = raw.get("function") or {}
    text = fn.get("arguments") or "{}"
    try:
        args = json.loads(text)
    except json.JSONDecodeError:
        return ToolCall(raw.get("id", ""), fn.get("name", ""), {}, text)
    if not isinstance(args, dict):
        return ToolCall(raw.get("id", ""), fn.get("name", ""), {}, text)
    return ToolCall(raw.get("id", ""), fn.get("name", ""), args)


class RemoteProvider:
    """Chat-completions client with bounded retries on transient failures."""

    RETRY_STATUS = {408, 409, 429, 500, 502, 503, 504}

    def __init__(self, api_key: str, base_url: str = DEFAULT_API_BASE, *, timeout: float = 120.0,
                 max_attempts: int = 3, backoff: float = 1.0,
                 transport: httpx.BaseTransport | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        self._client = httpx.Client(base_url=base_url.rstrip("/"), timeout=timeout, transport=transport,
                                    headers={"Authorization": f"Bearer {api_key}"})
        self.max_attempts = max_attempts
        self.backoff = backoff
        self._sleep = sleep

    @classmethod
    def from_env(cls, environ: Mapping[str, str] | None = None, **kwargs) -> "RemoteProvider":
        env = os.environ if environ is None else environ
        key = env.get(API_KEY_ENV)
        if not key:
            raise MissingCredentials(API_KEY_ENV)
        return cls(key, env.get(API_BASE_ENV) or DEFAULT_API_BASE, **kwargs)

    def payload(self, request: ModelRequest) -> dict:
        body: dict[str, Any] = {
            "model": request.model_id,
            "messages": [_wire_message(m) for m in request.messages],
            "max_completion_tokens": request.sampling.max_output_tokens,
        }
        if request.sampling.temperature is not None:
            body["temperature"] = request.sampling.temperature
        if request.tools:
            body["tools"] = [t.to_wire() for t in request.tools]
        return body

    def complete(self, request: ModelRequest) -> ModelResponse:
        body = self.payload(request)
        last_error = ""
        for attempt in range(1, self.max_attempts + 1):
            try:
                resp = self._client.post("/chat/completions", json=body)
            except httpx.TransportError as exc:
                last_error = f"transport failure: {exc}"
            else:
                if resp.status_code == 200:
                    return self._parse(resp.json(), request.model_id)
                last_error = f"HTTP {resp.status_code}: {resp.text[:500]}"
                if resp.status_code not in self.RETRY_STATUS:
                    raise ProviderError(f"provider rejected request: {last_error}")
            log.warning("model call attempt %d/%d failed: %s", attempt, self.max_attempts, last_error)
            if attempt < self.max_attempts:
                self._sleep(self.backoff * 2 ** (attempt - 1))
        raise ProviderError(f"model call failed after {self.max_attempts} attempts: {last_error}")

    @staticmethod
    def _parse(doc: dict, model_id: str) -> ModelResponse:
        if "error" in doc and not doc.get("choices"):
            raise ProviderError(f"provider error: {doc['error']}")
        try:
            msg = doc["choices"][0]["message"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed provider response: {str(doc)[:300]}") from exc
        calls = tuple(_parse_tool_call(c) for c in msg.get("tool_calls") or ())
        usage = doc.get("usage") or {}
        return ModelResponse(ChatMessage("assistant", msg.get("content") or "", calls),
                             Usage(int(usage.get("prompt_tokens", 0)), int(usage.get("completion_tokens", 0))),
                             doc.get("model") or model_id)

    def close(self) -> None:
        self._client.close()


# -- transcripts -------------------------------------------------------------

@dataclass(frozen=True)
class TranscriptEntry:
    fingerprint: str
    response: ModelResponse
    agent: str = ""
    request: Mapping[str, Any] | None = field(default=None, compare=False)

    def to_dict(self, index: int) -> dict:
        d = {"type": "entry", "index": index, "agent": self.agent, "fingerprint": self.fingerprint,
             "response": self.response.to_dict()}
        if self.request is not None:
            d["request"] = dict(self.request)
        return d


@dataclass
class Transcript:
    entries: list[TranscriptEntry] = field(default_factory=list)
    metadata: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | Path) -> "Transcript":
        entries, meta = [], {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ProviderError(f"{path}: line {lineno} is not valid JSON") from exc
                if rec.get("type") == "meta":
                    meta = {k: v for k, v in rec.items() if k != "type"}
                else:
                    entries.append(TranscriptEntry(rec["fingerprint"], ModelResponse.from_dict(rec["response"]),
                                                   rec.get("agent", ""), rec.get("request")))
        return cls(entries, meta)

    def dump(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"type": "meta", **self.metadata}, sort_keys=True) + "\n")
            for i, e in enumerate(self.entries):
                fh.write(json.dumps(e.to_dict(i), sort_keys=True, ensure_ascii=False) + "\n")

    @property
    def usage(self) -> Usage:
        total = Usage()
        for e in self.entries:
            total = total + e.response.usage
        return total


class RecordingProvider:
    """Forwards to ``inner`` and appends each exchange to a JSONL transcript."""

    def __init__(self, inner: ModelProvider, path: str | Path, metadata: Mapping[str, Any] | None = None):
        self.inner = inner
        self.path = Path(path)
        self._lock = threading.Lock()
        self._count = 0
        meta = {"created_at": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")}
        meta.update(metadata or {})
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"type": "meta", **meta}, sort_keys=True) + "\n")

    def complete(self, request: ModelRequest) -> ModelResponse:
        response = self.inner.complete(request)
        entry = TranscriptEntry(fingerprint(request), response, request.agent, request.to_dict())
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry.to_dict(self._count), sort_keys=True, ensure_ascii=False) + "\n")
            self._count += 1
        return response


class ReplayProvider:
    """Serves recorded responses without touching the network.

    In ordered mode (the default) requests must arrive in recorded order;
    unordered mode looks responses up by fingerprint alone.
    """

    def __init__(self, transcript: Transcript | str | Path, *, ordered: bool = True):
        if not isinstance(transcript, Transcript):
            transcript = Transcript.load(transcript)
        self.transcript = transcript
        self.ordered = ordered
        self.position = 0
        self._lock = threading.Lock()
        self._index = {e.fingerprint: e.response for e in transcript.entries}

    @property
    def exhausted(self) -> bool:
        return self.position >= len(self.transcript.entries)

    def complete(self, request: ModelRequest) -> ModelResponse:
        fp = fingerprint(request)
        if not self.ordered:
            if fp not in self._index:
                raise ReplayMiss(-1, None, fp)
            return self._index[fp]
        with self._lock:
            entries = self.transcript.entries
            if self.position >= len(entries) or entries[self.position].fingerprint != fp:
                expected = entries[self.position].fingerprint if self.position < len(entries) else None
                raise ReplayMiss(self.position, expected, fp)
            self.position += 1
            return entries[self.position - 1].response

