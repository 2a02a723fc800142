"""Chat-completion access for the agents, with live, replay, and stub backends.

Replay serves recorded responses keyed by a normalized fingerprint of the
request messages, which makes every pipeline behavior reproducible
offline; the stub backend returns canned responses for tests and demos.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field

import httpx

from .errors import BackendUnavailable, ReplayMiss, StubMiss

logger = logging.getLogger(__name__)

ADVISOR = "advisor"
UI_PLANNER = "ui_planner"
UI_CODER = "ui_coder"
CODE_INJECTOR = "code_injector"
PROMPT_SUGGESTER = "prompt_suggester"
AGENT_IDS = (ADVISOR, UI_PLANNER, UI_CODER, CODE_INJECTOR, PROMPT_SUGGESTER)

DEFAULT_CONTEXT_BUDGET = 24_000
TRUNCATION_SENTINEL = "[context truncated]"

BASE_URL_ENV = "ENGINE_LLM_BASE_URL"
API_KEY_ENV = "ENGINE_LLM_API_KEY"


@dataclass
class AgentConfig:
    agent_id: str
    model_id: str
    temperature: float
    system_template: str
    max_output_tokens: int = 1024

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")


def default_agent_configs() -> dict[str, AgentConfig]:
    """One config per agent. Model ids are overridable via engine config."""
    strong = "gpt-4-turbo-0125"
    return {
        ADVISOR: AgentConfig(
            ADVISOR, strong, 0.3,
            "You advise a programmer working in a computational notebook. "
            "Given their request and code, reply with one concrete next step "
            "in a single short paragraph.",
        ),
        UI_PLANNER: AgentConfig(
            UI_PLANNER, strong, 0.2,
            "You design small widget panels that help a programmer steer code "
            "generation. Reply with JSON only, following the schema in the "
            "user message exactly.",
        ),
        UI_CODER: AgentConfig(
            UI_CODER, strong, 0.2,
            "You write Python snippets that build widget panels with the "
            "toolkit API given in the user message. Reply with JSON only.",
            max_output_tokens=2048,
        ),
        CODE_INJECTOR: AgentConfig(
            CODE_INJECTOR, "gpt-3.5-turbo", 0.2,
            "You write a single Python code block for a notebook cell. Reply "
            "with code only, no prose.",
        ),
        PROMPT_SUGGESTER: AgentConfig(
            PROMPT_SUGGESTER, strong, 0.8,
            "You suggest one natural-language request a programmer could make "
            "about the notebook code they are reading. Reply with the "
            "suggestion only.",
        ),
    }


@dataclass
class ChatExchange:
    agent_id: str
    request_messages: list[tuple[str, str]]  # (role, content), system first
    response: str
    latency_ms: int
    backend: str


def fingerprint_messages(messages: list[tuple[str, str]]) -> str:
    """Stable content hash of the request; whitespace-collapsed so trailing
    whitespace and line-ending differences never change the key."""
    normalized = [[role, " ".join(content.split())] for role, content in messages]
    payload = json.dumps(normalized, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def render_context(blocks: list[str], budget: int = DEFAULT_CONTEXT_BUDGET) -> str:
    """Join context blocks, keeping the newest ones within the character budget.

    Dropped older blocks are replaced by a single truncation sentinel at
    the top; kept blocks stay in document order.
    """
    kept: list[str] = []
    total = 0
    truncated = False
    for block in reversed(blocks):
        if total + len(block) > budget:
            truncated = True
            break
        kept.append(block)
        total += len(block)
    kept.reverse()
    if truncated:
        kept.insert(0, TRUNCATION_SENTINEL)
    return "\n\n".join(kept)


class TranscriptStore:
    """Recorded responses keyed by (agent_id, request fingerprint)."""

    def __init__(self):
        self.entries: dict[str, dict[str, str]] = {}

    def __len__(self) -> int:
        return sum(len(v) for v in self.entries.values())

    def record(self, agent_id: str, fingerprint: str, response: str) -> None:
        self.entries.setdefault(agent_id, {})[fingerprint] = response

    def lookup(self, agent_id: str, fingerprint: str) -> str:
        try:
            return self.entries[agent_id][fingerprint]
        except KeyError:
            raise ReplayMiss(agent_id, fingerprint) from None

    def export_file(self, path) -> None:
        # Keys sorted so exports diff cleanly across runs.
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.entries, fh, indent=2, sort_keys=True, ensure_ascii=False)
            fh.write("\n")

    @classmethod
    def import_file(cls, path) -> "TranscriptStore":
        store = cls()
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        for agent_id, by_fp in data.items():
            for fp, response in by_fp.items():
                store.record(agent_id, fp, response)
        return store


class LiveBackend:
    """Chat-completion HTTP client. Transport errors are retried twice with
    exponential backoff; model-side content is never retried here. Calls
    are rate limited per agent via a minimum inter-call interval."""

    name = "live"

    def __init__(self, base_url: str | None = None, api_key: str | None = None,
                 transport=None, sleep=time.sleep, min_interval_s: float = 0.0):
        self.base_url = (base_url or os.environ.get(BASE_URL_ENV, "")).rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self._transport = transport or self._http_transport
        self._sleep = sleep
        self._min_interval_s = min_interval_s
        self._last_call: dict[str, float] = {}
        self._rate_lock = threading.Lock()

    def _throttle(self, agent_id: str) -> None:
        if self._min_interval_s <= 0:
            return
        with self._rate_lock:
            now = time.monotonic()
            wait = self._last_call.get(agent_id, -self._min_interval_s) \
                + self._min_interval_s - now
            self._last_call[agent_id] = now + max(wait, 0.0)
        if wait > 0:
            self._sleep(wait)

    def _http_transport(self, config: AgentConfig,
                        messages: list[tuple[str, str]]) -> str:
        if not self.base_url:
            raise BackendUnavailable(f"{BASE_URL_ENV} is not set")
        payload = {
            "model": config.model_id,
            "temperature": config.temperature,
            "max_tokens": config.max_output_tokens,
            "messages": [{"role": r, "content": c} for r, c in messages],
        }
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        response = httpx.post(f"{self.base_url}/chat/completions", json=payload,
                              headers=headers, timeout=120.0)
        response.raise_for_status()
        return response.json()["choices"][0]["message"]["content"]

    def complete(self, config: AgentConfig, messages: list[tuple[str, str]]) -> str:
        self._throttle(config.agent_id)
        last_error: Exception | None = None
        for attempt in range(3):  # initial try + 2 retries
            try:
                return self._transport(config, messages)
            except (httpx.TransportError, ConnectionError, TimeoutError) as exc:
                last_error = exc
                if attempt < 2:
                    self._sleep(0.5 * 2 ** attempt)
        raise BackendUnavailable(f"live backend failed after retries: {last_error}")


class ReplayBackend:
    name = "replay"

    def __init__(self, store: TranscriptStore):
        self.store = store

    def complete(self, config: AgentConfig, messages: list[tuple[str, str]]) -> str:
        return self.store.lookup(config.agent_id, fingerprint_messages(messages))


class StubBackend:
    """Canned responses per agent: a constant, a FIFO list, or a callable
    taking the request messages."""

    name = "stub"

    def __init__(self, responses: dict | None = None):
        self._responders: dict[str, object] = {}
        for agent_id, value in (responses or {}).items():
            self.register(agent_id, value)

    def register(self, agent_id: str, responder) -> None:
        if isinstance(responder, list):
            responder = list(responder)
        self._responders[agent_id] = responder

    def complete(self, config: AgentConfig, messages: list[tuple[str, str]]) -> str:
        responder = self._responders.get(config.agent_id)
        if responder is None:
            raise StubMiss(f"no stub response registered for {config.agent_id}")
        if callable(responder):
            return responder(messages)
        if isinstance(responder, list):
            if not responder:
                raise StubMiss(f"stub responses for {config.agent_id} exhausted")
            return responder.pop(0)
        return responder


class LlmGateway:
    """Uniform completion access for all agents over one selected backend.

    Safe for concurrent calls; every call is appended to the exchange
    log. When ``record_to`` is set (live mode only), responses are also
    written into that transcript store.
    """

    def __init__(self, backend, configs: dict[str, AgentConfig] | None = None,
                 context_budget: int = DEFAULT_CONTEXT_BUDGET,
                 record_to: TranscriptStore | None = None):
        self.backend = backend
        self.configs = configs or default_agent_configs()
        self.context_budget = context_budget
        self.exchanges: list[ChatExchange] = []
        self._lock = threading.Lock()
        if record_to is not None and backend.name != "live":
            raise ValueError("recording is only allowed in live mode")
        self.record_to = record_to

    def complete(self, agent_id: str, user_content: str,
                 context_blocks: list[str] | None = None) -> str:
        config = self.configs.get(agent_id)
        if config is None:
            raise ValueError(f"no agent config for {agent_id!r}")
        if context_blocks:
            user_content = user_content + "\n\n" + render_context(
                context_blocks, self.context_budget)
        messages = [("system", config.system_template), ("user", user_content)]
        started = time.monotonic()
        response = self.backend.complete(config, messages)
        latency_ms = int((time.monotonic() - started) * 1000)
        exchange = ChatExchange(agent_id=agent_id, request_messages=messages,
                                response=response, latency_ms=latency_ms,
                                backend=self.backend.name)
        with self._lock:
            self.exchanges.append(exchange)
            if self.record_to is not None:
                self.record_to.record(agent_id, fingerprint_messages(messages), response)
        return response
