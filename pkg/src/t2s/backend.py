"""Generation backends: the wire contract, an HTTP client, and a scripted mock.

Any object with a ``generate(request) -> GenerationOutcome`` method is a
backend. Outcomes carry the raw completion text and, when the backend
supports them, per-token log-probabilities; absence is explicit (tokens is
None), never fabricated zeros.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, runtime_checkable

import requests

from .errors import (
    BackendProtocolError,
    BackendTransportError,
    ConfigError,
    ScriptExhaustedError,
)

ENV_BACKEND_URL = "T2S_BACKEND_URL"
ENV_BACKEND_KEY = "T2S_BACKEND_KEY"

FINISH_STOP = "stop"
FINISH_LENGTH = "length"
FINISH_ERROR = "error"
FINISH_REASONS = (FINISH_STOP, FINISH_LENGTH, FINISH_ERROR)


@dataclass(frozen=True)
class GenerationRequest:
    """One completion request. Backends never mutate it."""

    prompt: str
    max_output_tokens: int = 256
    temperature: float = 0.0
    stop_sequences: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be at least 1")
        if self.temperature < 0.0:
            raise ValueError("temperature must be non-negative")
        object.__setattr__(self, "stop_sequences", tuple(self.stop_sequences))


@dataclass(frozen=True)
class Token:
    """One generated token: its log-probability and, if known, its text piece."""

    logprob: float
    piece: str | None = None

    def __post_init__(self):
        if self.logprob > 0.0:
            raise BackendProtocolError(
                f"token log-probability {self.logprob} is positive; "
                "log-domain values are never > 0"
            )


@dataclass(frozen=True)
class GenerationOutcome:
    """A backend's answer: raw text, finish reason, optional token logprobs."""

    raw_text: str
    finish: str = FINISH_STOP
    tokens: tuple[Token, ...] | None = None

    def __post_init__(self):
        if self.finish not in FINISH_REASONS:
            raise BackendProtocolError(
                f"finish must be one of {FINISH_REASONS}, got {self.finish!r}"
            )
        if self.tokens is not None:
            object.__setattr__(self, "tokens", tuple(self.tokens))
        if self.finish == FINISH_ERROR and self.tokens:
            raise BackendProtocolError("an error outcome carries no tokens")
        if self.tokens and all(t.piece is not None for t in self.tokens):
            joined = "".join(t.piece for t in self.tokens)
            if joined != self.raw_text:
                raise BackendProtocolError(
                    "token pieces do not concatenate to the raw text"
                )

    @property
    def logprobs(self) -> tuple[float, ...] | None:
        if self.tokens is None:
            return None
        return tuple(t.logprob for t in self.tokens)


@runtime_checkable
class Backend(Protocol):
    def generate(self, request: GenerationRequest) -> GenerationOutcome: ...


class HttpBackend:
    """Client for completion servers exposing POST {base_url}/v1/completions.

    The request body is ``{"prompt", "max_tokens", "temperature", "stop",
    "logprobs": true}``; the answer is read from ``choices[0].text`` and
    ``choices[0].logprobs.token_logprobs``. base_url and api_key fall back
    to the T2S_BACKEND_URL / T2S_BACKEND_KEY environment variables.
    """

    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        timeout: float = 60.0,
        session: requests.Session | None = None,
    ):
        base_url = base_url or os.environ.get(ENV_BACKEND_URL)
        if not base_url:
            raise ConfigError(
                f"no backend URL: pass base_url or set {ENV_BACKEND_URL}"
            )
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key or os.environ.get(ENV_BACKEND_KEY)
        self.timeout = timeout
        self._session = session or requests.Session()

    def generate(self, request: GenerationRequest) -> GenerationOutcome:
        payload = {
            "prompt": request.prompt,
            "max_tokens": request.max_output_tokens,
            "temperature": request.temperature,
            "stop": list(request.stop_sequences) or None,
            "logprobs": True,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        url = f"{self.base_url}/v1/completions"
        try:
            response = self._session.post(
                url, json=payload, headers=headers, timeout=self.timeout
            )
        except requests.Timeout as exc:
            raise BackendTransportError(f"backend timed out after {self.timeout}s: {exc}") from exc
        except requests.RequestException as exc:
            raise BackendTransportError(f"cannot reach backend at {url}: {exc}") from exc

        if response.status_code >= 400:
            raise BackendProtocolError(
                f"backend returned HTTP {response.status_code}: {response.text[:500]}"
            )
        try:
            body = response.json()
        except ValueError as exc:
            raise BackendProtocolError(f"backend returned non-JSON body: {exc}") from exc
        return self._outcome_from_body(body)

    @staticmethod
    def _outcome_from_body(body: dict) -> GenerationOutcome:
        choices = body.get("choices")
        if not isinstance(choices, list) or not choices:
            raise BackendProtocolError("backend response has no choices")
        choice = choices[0]
        text = choice.get("text")
        if not isinstance(text, str):
            raise BackendProtocolError("backend response choice has no text")
        finish = choice.get("finish_reason") or FINISH_STOP
        if finish not in FINISH_REASONS:
            finish = FINISH_STOP

        tokens: tuple[Token, ...] | None = None
        logprobs = choice.get("logprobs")
        if isinstance(logprobs, dict):
            values = logprobs.get("token_logprobs")
            if isinstance(values, list):
                pieces = logprobs.get("tokens")
                if not (isinstance(pieces, list) and len(pieces) == len(values)):
                    pieces = [None] * len(values)
                # Some servers emit null for the first token; those entries
                # carry no information and are dropped, not zero-filled.
                pairs = [
                    (value, piece)
                    for value, piece in zip(values, pieces)
                    if value is not None
                ]
                kept_pieces = [p for _, p in pairs]
                if any(p is None for p in kept_pieces) or len(pairs) != len(values):
                    kept_pieces = [None] * len(pairs)
                tokens = tuple(
                    Token(logprob=float(value), piece=piece)
                    for (value, _), piece in zip(pairs, kept_pieces)
                )
        if finish == FINISH_ERROR:
            tokens = None
        return GenerationOutcome(raw_text=text, finish=finish, tokens=tokens)


@dataclass(frozen=True)
class ScriptEntry:
    """One scripted response: text, optional logprobs, finish reason."""

    text: str
    token_logprobs: tuple[float, ...] | None = None
    finish: str = FINISH_STOP


class ScriptedBackend:
    """Deterministic mock that replays a fixed response script in order.

    Thread-safe; a request past the end of the script raises
    ScriptExhaustedError rather than inventing output.
    """

    def __init__(self, entries: list[ScriptEntry]):
        if not entries:
            raise BackendProtocolError("a scripted backend needs at least one entry")
        self._entries = list(entries)
        self._lock = threading.Lock()
        self._cursor = 0

    @property
    def calls_made(self) -> int:
        return self._cursor

    @property
    def remaining(self) -> int:
        return len(self._entries) - self._cursor

    def generate(self, request: GenerationRequest) -> GenerationOutcome:
        with self._lock:
            if self._cursor >= len(self._entries):
                raise ScriptExhaustedError(
                    f"script exhausted after {len(self._entries)} responses"
                )
            entry = self._entries[self._cursor]
            self._cursor += 1
        tokens = None
        if entry.token_logprobs is not None and entry.finish != FINISH_ERROR:
            tokens = tuple(Token(logprob=lp) for lp in entry.token_logprobs)
        return GenerationOutcome(raw_text=entry.text, finish=entry.finish, tokens=tokens)


def mock_from_script(source: str | Path | list) -> ScriptedBackend:
    """Build a ScriptedBackend from a JSON array (or its parsed form).

    Each entry is ``{"text": str, "token_logprobs"?: [float <= 0],
    "finish"?: "stop"|"length"|"error"}``. Positive log-probabilities and
    tokens on error entries are rejected at load time.
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        try:
            entries = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise BackendProtocolError(f"cannot read script {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise BackendProtocolError(f"{path}: invalid JSON: {exc}") from exc
        where = str(path)
    else:
        entries = source
        where = "<script>"
    if not isinstance(entries, list) or not entries:
        raise BackendProtocolError(f"{where}: script must be a non-empty JSON array")

    parsed: list[ScriptEntry] = []
    for i, entry in enumerate(entries):
        loc = f"{where}: entry {i}"
        if not isinstance(entry, dict):
            raise BackendProtocolError(f"{loc} must be an object")
        text = entry.get("text")
        if not isinstance(text, str):
            raise BackendProtocolError(f"{loc}: 'text' must be a string")
        finish = entry.get("finish", FINISH_STOP)
        if finish not in FINISH_REASONS:
            raise BackendProtocolError(
                f"{loc}: 'finish' must be one of {FINISH_REASONS}, got {finish!r}"
            )
        raw_logprobs = entry.get("token_logprobs")
        token_logprobs: tuple[float, ...] | None = None
        if raw_logprobs is not None:
            if not isinstance(raw_logprobs, list):
                raise BackendProtocolError(f"{loc}: 'token_logprobs' must be a list")
            for value in raw_logprobs:
                if not isinstance(value, (int, float)):
                    raise BackendProtocolError(
                        f"{loc}: token_logprobs entries must be numbers"
                    )
                if value > 0:
                    raise BackendProtocolError(
                        f"{loc}: log-probability {value} is positive"
                    )
            token_logprobs = tuple(float(v) for v in raw_logprobs)
            if finish == FINISH_ERROR and token_logprobs:
                raise BackendProtocolError(f"{loc}: an error entry carries no tokens")
        parsed.append(ScriptEntry(text=text, token_logprobs=token_logprobs, finish=finish))
    return ScriptedBackend(parsed)
