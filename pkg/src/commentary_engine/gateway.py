"""Uniform completion interface: deterministic mock and OpenAI-compatible HTTP provider."""

from __future__ import annotations

import hashlib
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Mapping, Protocol

import httpx

from .errors import (
    BudgetExceeded,
    GatewayTimeout,
    ParseError,
    ProviderError,
)
from .taxonomy import DIRECTIONS, display_direction
from .templates import TemplateRegistry

logger = logging.getLogger(__name__)

# Templates whose replies get machine-parsed run cold; free generation runs warm.
PARSING_TEMPLATES = frozenset(
    {"ingest_summarize", "ingest_direction", "ingest_elements", "ingest_paragraph",
     "judge_dimension"}
)
TEMPERATURE_GENERATION = 0.7
TEMPERATURE_PARSING = 0.0


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    max_tokens: int = 1024
    temperature: float = TEMPERATURE_GENERATION
    seed: int | None = None
    stop: tuple[str, ...] | None = None
    template_id: str | None = None  # lets the mock answer in template-specific shape


@dataclass(frozen=True)
class CompletionResult:
    text: str
    provider: str
    latency_ms: int
    token_usage: dict[str, int]  # {"prompt": n, "completion": n}, zeros when unknown
    retries: int = 0


class TokenBudget:
    """Cumulative token meter, typically one per pipeline session."""

    def __init__(self, limit: int | None):
        self.limit = limit
        self.spent = 0
        self._lock = threading.Lock()

    def precheck(self) -> None:
        if self.limit is not None and self.spent >= self.limit:
            raise BudgetExceeded(f"token budget exhausted: {self.spent}/{self.limit}")

    def charge(self, tokens: int) -> None:
        with self._lock:
            self.spent += tokens
            if self.limit is not None and self.spent > self.limit:
                raise BudgetExceeded(f"token budget exceeded: {self.spent}/{self.limit}")


class _TransientFailure(Exception):
    def __init__(self, status: int, body: str, timeout: bool = False):
        super().__init__(f"transient provider failure ({status})")
        self.status = status
        self.body = body
        self.timeout = timeout


class CompletionProvider(Protocol):
    name: str

    def complete(self, request: CompletionRequest) -> tuple[str, dict[str, int]]:
        """Return (text, token_usage); raise _TransientFailure for retryable faults."""
        ...


def _digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:8]


_REF_LINE_RE = re.compile(r"^\[(\d+)\]\s", re.MULTILINE)


class MockProvider:
    """Deterministic offline provider.

    Output is "MOCK[<template-id>|<8-hex digest of the prompt>]" plus, for
    templates whose reply gets machine-parsed, a canned well-formed body so the
    full pipeline can run structurally with zero network.
    """

    name = "mock"

    def complete(self, request: CompletionRequest) -> tuple[str, dict[str, int]]:
        template_id = request.template_id or "raw"
        digest = _digest(request.prompt)
        text = f"MOCK[{template_id}|{digest}]"
        body = self._canned_body(template_id, digest, request.prompt)
        if body:
            text = f"{text}\n{body}"
        usage = {"prompt": max(1, len(request.prompt) // 4),
                 "completion": max(1, len(text) // 4)}
        return text, usage

    @staticmethod
    def _canned_body(template_id: str, digest: str, prompt: str) -> str | None:
        if template_id == "ingest_direction":
            return display_direction(DIRECTIONS[int(digest, 16) % len(DIRECTIONS)])
        if template_id == "ingest_elements":
            return "\n".join(
                f"{key}: mock {key} ({digest})"
                for key in ("time", "location", "person", "cause", "process", "result")
            )
        if template_id == "supporting_argument":
            return "\n".join(
                f"{i}. Mock supporting argument {word} ({digest})"
                for i, word in enumerate(("one", "two", "three"), start=1)
            )
        if template_id == "judge_dimension":
            return "8"
        if template_id == "evidence":
            refs = [int(m) for m in _REF_LINE_RE.findall(prompt)]
            if not refs:
                return f"Mock evidence drawing only on the arguments themselves ({digest})."
            cited = " and ".join(f"[{n}]" for n in sorted(refs)[:2])
            return f"Mock evidence grounded in the reference information {cited} ({digest})."
        if template_id == "baseline_one_shot":
            return (
                f"Title: Mock one-shot commentary ({digest})\n\n"
                f"Mock one-shot article body built from the provided background ({digest})."
            )
        return None


class OpenAiCompatProvider:
    """Chat-completions JSON over HTTP against any OpenAI-compatible endpoint."""

    name = "openai"

    def __init__(self, base_url: str, model: str, api_key: str = "",
                 timeout_ms: int = 30000, transport: httpx.BaseTransport | None = None):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self._client = httpx.Client(timeout=timeout_ms / 1000.0, transport=transport)
        self._headers = {"Content-Type": "application/json"}
        if api_key:
            self._headers["Authorization"] = f"Bearer {api_key}"

    def complete(self, request: CompletionRequest) -> tuple[str, dict[str, int]]:
        payload: dict = {
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        if request.seed is not None:
            payload["seed"] = request.seed
        if request.stop:
            payload["stop"] = list(request.stop)
        try:
            response = self._client.post(
                f"{self.base_url}/chat/completions", json=payload, headers=self._headers
            )
        except httpx.TimeoutException as exc:
            raise _TransientFailure(0, str(exc), timeout=True) from exc
        except httpx.HTTPError as exc:
            raise _TransientFailure(0, str(exc)) from exc
        if response.status_code >= 500:
            raise _TransientFailure(response.status_code, response.text)
        if response.status_code != 200:
            raise ProviderError(response.status_code, response.text)
        data = response.json()
        try:
            text = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(200, f"malformed completion payload: {data!r}") from exc
        usage = data.get("usage") or {}
        return text, {
            "prompt": int(usage.get("prompt_tokens", 0)),
            "completion": int(usage.get("completion_tokens", 0)),
        }


@dataclass
class GatewayConfig:
    provider: str = "mock"  # "mock" | "openai"
    base_url: str = ""
    model: str = ""
    api_key_env: str = "COMMENTARY_API_KEY"
    timeout_ms: int = 30000
    retry_max: int = 2
    retry_backoff_ms: int = 250
    inflight_limit: int = 4
    max_tokens_limit: int = 4096
    token_budget: int | None = None

    def build_provider(self) -> CompletionProvider:
        if self.provider == "mock":
            return MockProvider()
        if self.provider == "openai":
            return OpenAiCompatProvider(
                base_url=self.base_url,
                model=self.model,
                api_key=os.environ.get(self.api_key_env, ""),
                timeout_ms=self.timeout_ms,
            )
        raise ValueError(f"unknown provider: {self.provider}")


# --- response parsers --------------------------------------------------------

_NUMBER_LINE_RE = re.compile(r"^[+-]?\d+(?:\.\d+)?$")
_LIST_ITEM_RE = re.compile(r"^\s*(?:\((\d+)\)|(\d+)[.、])\s*(.+?)\s*$")
_ELEMENT_KEYS = ("time", "location", "person", "cause", "process", "result")


def parse_score_line(text: str) -> float:
    """First line that contains only one numeric value."""
    for line in text.splitlines():
        stripped = line.strip()
        if stripped and _NUMBER_LINE_RE.match(stripped):
            return float(stripped)
    raise ValueError("no line containing only a numeric value")


def parse_six_elements(text: str) -> dict[str, str]:
    elements: dict[str, str] = {}
    for line in text.splitlines():
        if ":" not in line:
            continue
        key, _, value = line.partition(":")
        key = key.strip().lower()
        if key in _ELEMENT_KEYS:
            elements[key] = value.strip()
    missing = [k for k in _ELEMENT_KEYS if k not in elements]
    if missing:
        raise ValueError(f"missing elements: {', '.join(missing)}")
    return {k: elements[k] for k in _ELEMENT_KEYS}


def parse_numbered_list(text: str) -> list[str]:
    items = []
    for line in text.splitlines():
        match = _LIST_ITEM_RE.match(line)
        if match:
            items.append(match.group(3))
    if not items:
        raise ValueError("no numbered list items found")
    return items


_PARSERS = {
    "score_line": parse_score_line,
    "six_elements": parse_six_elements,
    "numbered_list": parse_numbered_list,
}

_REPROMPT_HINTS = {
    "score_line": "Output exactly one line containing only the numeric score, nothing else.",
    "six_elements": (
        "Reply with exactly six lines in the form 'time: ...', 'location: ...', "
        "'person: ...', 'cause: ...', 'process: ...', 'result: ...'."
    ),
    "numbered_list": "Reply with a numbered list only, one item per line, like '1. ...'.",
}


class LlmGateway:
    """Renders templates, dispatches completions, retries transient faults,
    enforces the in-flight limit and optional token budgets."""

    def __init__(self, config: GatewayConfig | None = None,
                 provider: CompletionProvider | None = None,
                 templates: TemplateRegistry | None = None):
        self.config = config or GatewayConfig()
        self.provider = provider or self.config.build_provider()
        self.templates = templates or TemplateRegistry()
        self._inflight = threading.Semaphore(self.config.inflight_limit)

    # --- template helpers ----------------------------------------------------

    def render(self, template_id: str, slots: Mapping[str, str]) -> str:
        return self.templates.render(template_id, slots)

    def request_for(self, template_id: str, slots: Mapping[str, str],
                    temperature: float | None = None,
                    max_tokens: int | None = None) -> CompletionRequest:
        if temperature is None:
            temperature = (
                TEMPERATURE_PARSING if template_id in PARSING_TEMPLATES
                else TEMPERATURE_GENERATION
            )
        return CompletionRequest(
            prompt=self.render(template_id, slots),
            max_tokens=min(max_tokens or 1024, self.config.max_tokens_limit),
            temperature=temperature,
            template_id=template_id,
        )

    def complete_template(self, template_id: str, slots: Mapping[str, str],
                          budget: TokenBudget | None = None,
                          temperature: float | None = None) -> CompletionResult:
        return self.complete(self.request_for(template_id, slots, temperature), budget)

    # --- completion ------------------------------------------------------------

    def complete(self, request: CompletionRequest,
                 budget: TokenBudget | None = None) -> CompletionResult:
        if request.max_tokens > self.config.max_tokens_limit:
            request = CompletionRequest(
                prompt=request.prompt,
                max_tokens=self.config.max_tokens_limit,
                temperature=request.temperature,
                seed=request.seed,
                stop=request.stop,
                template_id=request.template_id,
            )
        if budget is not None:
            budget.precheck()
        started = time.monotonic()
        last_failure: _TransientFailure | None = None
        with self._inflight:
            for attempt in range(self.config.retry_max + 1):
                if attempt and self.config.retry_backoff_ms:
                    time.sleep(self.config.retry_backoff_ms / 1000.0 * 2 ** (attempt - 1))
                try:
                    text, usage = self.provider.complete(request)
                except _TransientFailure as failure:
                    last_failure = failure
                    logger.warning("transient provider failure (attempt %d): %s",
                                   attempt + 1, failure)
                    continue
                latency_ms = int((time.monotonic() - started) * 1000)
                if budget is not None:
                    budget.charge(usage.get("prompt", 0) + usage.get("completion", 0))
                return CompletionResult(
                    text=text,
                    provider=self.provider.name,
                    latency_ms=latency_ms,
                    token_usage=usage,
                    retries=attempt,
                )
        assert last_failure is not None
        if last_failure.timeout:
            raise GatewayTimeout(
                f"provider timed out after {self.config.retry_max + 1} attempts"
            )
        raise ProviderError(last_failure.status, last_failure.body)

    def complete_parsed(self, request: CompletionRequest, parser: str,
                        budget: TokenBudget | None = None):
        """Parse the completion; one stricter reprompt on failure, then ParseError."""
        value, _result = self.complete_parsed_detailed(request, parser, budget)
        return value

    def complete_parsed_detailed(
        self, request: CompletionRequest, parser: str,
        budget: TokenBudget | None = None,
    ):
        """complete_parsed plus the CompletionResult the value was parsed from."""
        parse = _PARSERS[parser]
        result = self.complete(request, budget)
        try:
            return parse(result.text), result
        except ValueError:
            logger.warning("parse failure (%s), reprompting once", parser)
        reprompt = CompletionRequest(
            prompt=(
                f"{request.prompt}\n\nYour previous reply could not be parsed. "
                f"{_REPROMPT_HINTS[parser]}"
            ),
            max_tokens=request.max_tokens,
            temperature=request.temperature,
            seed=request.seed,
            stop=request.stop,
            template_id=request.template_id,
        )
        retry = self.complete(reprompt, budget)
        try:
            return parse(retry.text), retry
        except ValueError as exc:
            raise ParseError(f"unparseable {parser} response: {exc}", raw_text=retry.text)

    def complete_parsed_template(self, template_id: str, slots: Mapping[str, str],
                                 parser: str, budget: TokenBudget | None = None):
        return self.complete_parsed(self.request_for(template_id, slots), parser, budget)
