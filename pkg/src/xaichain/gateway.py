"""Chat-completion client with a deterministic offline backend.

Two backends share one entry point. ``live`` posts chat-completions JSON to a
configurable HTTP endpoint. ``mock`` never opens a socket; it derives a canned
reply from a SHA-256 digest of the conversation, so identical histories always
receive identical answers.
"""

import hashlib
import json
import os
import random
import re
import threading
import time
from dataclasses import asdict, dataclass, field, fields

import httpx

from .exceptions import (
    ConfigurationError,
    EmptyResponseError,
    InvalidArgumentError,
    ProtocolError,
    StageError,
    TransportError,
)

ROLES = ("system", "user", "assistant")
BACKENDS = ("live", "mock")
_RETRY_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}


@dataclass(frozen=True)
class ChatTurn:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise InvalidArgumentError(f"unknown role {self.role!r}")
        if not isinstance(self.content, str) or not self.content.strip():
            raise InvalidArgumentError("chat turn content must be non-empty text")

    def to_message(self):
        return {"role": self.role, "content": self.content}


def check_history(history):
    history = list(history)
    if not history:
        raise InvalidArgumentError("history must contain at least one turn")
    for turn in history:
        if not isinstance(turn, ChatTurn):
            raise InvalidArgumentError("history entries must be ChatTurn instances")
    for prev, cur in zip(history, history[1:]):
        if prev.role == cur.role == "assistant":
            raise InvalidArgumentError("two consecutive assistant turns")
    if history[-1].role != "user":
        raise InvalidArgumentError("the last turn must come from the user")
    return history


@dataclass(frozen=True)
class GatewayConfig:
    endpoint_url: str = None
    model_name: str = "mock-chat"
    temperature: float = 0.0
    max_output_tokens: int = 1024
    timeout: float = 60.0
    max_retries: int = 3
    max_in_flight: int = 4
    backend: str = "mock"
    api_key_env: str = "ILLUM_API_KEY"
    auth_header: str = "Authorization"
    auth_scheme: str = "Bearer"
    backoff_base: float = 0.5
    backoff_cap: float = 8.0

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ConfigurationError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.temperature < 0:
            raise ConfigurationError("temperature must be >= 0")
        if self.max_in_flight < 1:
            raise ConfigurationError("max_in_flight must be >= 1")
        if self.max_retries < 0 or self.max_output_tokens < 1 or self.timeout <= 0:
            raise ConfigurationError("max_retries >= 0, max_output_tokens >= 1 and timeout > 0 are required")
        if self.backend == "live" and not self.endpoint_url:
            raise ConfigurationError("live backend needs endpoint_url")

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown gateway settings: {sorted(unknown)}")
        if "api_key" in data:
            raise ConfigurationError("credentials are read from the environment only")
        return cls(**data)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class Completion:
    text: str
    usage: dict = field(default_factory=dict)
    attempts: int = 1
    backend: str = "mock"
    model: str = ""


# ---------------------------------------------------------------- mock backend

_QUESTION_LINE = re.compile(r"^\s*\d+\.\s+\S", re.M)

_REPORT_SENTENCES = (
    "The student has been active in the course, but engagement dropped in recent weeks.",
    "The number of sessions is the most influential feature for this prediction.",
    "Regular study at a consistent hour of the day is linked to better outcomes.",
    "Watching the lecture videos soon after release helps the student keep pace.",
    "Attempting more problems each week builds the skills needed for upcoming topics.",
    "The filter design material in week five depends on the transforms from week four.",
    "Short sessions suggest the student may be skimming rather than studying in depth.",
    "Weekend activity is low compared with weekday activity.",
)

_FEEDBACK_SENTENCES = (
    "You have made a solid start, and the goal now is to master filter design.",
    "Your recent weeks show fewer study sessions than before.",
    "Try to plan two focused sessions each week at a regular time.",
    "Revisit the week four videos on the Fourier transform before the next quiz.",
    "Attempt the practice problems soon after each lecture is released.",
    "Small steady habits will help you most in the weeks ahead.",
)


def _digest(messages):
    blob = json.dumps(messages, sort_keys=True, ensure_ascii=False).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def _pick(pool, digest, k):
    start = int(digest[:8], 16) % len(pool)
    return [pool[(start + i) % len(pool)] for i in range(k)]


def judge_question_count(prompt):
    """Number of numbered questions in a rendered judge prompt, or 0 if it is not one."""
    if "QUESTIONS:" not in prompt or "YES/NO" not in prompt:
        return 0
    section = prompt.split("QUESTIONS:", 1)[1].split("FORMAT:", 1)[0]
    return len(_QUESTION_LINE.findall(section))


def default_mock_responder(messages):
    """Canned reply keyed on the conversation digest.

    Judge prompts get an all-YES list of the right length, prompts asking for
    JSON get a JSON object with a ``feedback`` string, anything else a short
    prose report.
    """
    prompt = messages[-1]["content"]
    digest = _digest(messages)
    n = judge_question_count(prompt)
    if n:
        return "[" + ", ".join(["YES"] * n) + "]"
    if "JSON" in prompt:
        return json.dumps({"feedback": " ".join(_pick(_FEEDBACK_SENTENCES, digest, 4))})
    return f"Report {digest[:12]}. " + " ".join(_pick(_REPORT_SENTENCES, digest, 5))


class MockBackend:
    def __init__(self, responder=None):
        self.responder = responder or default_mock_responder
        self.calls = 0
        self._lock = threading.Lock()

    def __call__(self, messages, cfg):
        with self._lock:
            self.calls += 1
        text = self.responder(messages)
        if text is None or not str(text).strip():
            raise EmptyResponseError("mock responder returned empty text")
        words = sum(len(m["content"].split()) for m in messages)
        usage = {"prompt_tokens": words, "completion_tokens": len(str(text).split())}
        return Completion(str(text), usage, 1, "mock", cfg.model_name)


# ---------------------------------------------------------------- live backend


class _Retryable(Exception):
    def __init__(self, message, retry_after=None):
        super().__init__(message)
        self.retry_after = retry_after


def parse_completion_body(body):
    """Pull ``choices[0].message.content`` and ``usage`` out of a response body."""
    try:
        data = json.loads(body)
        content = data["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise ProtocolError(f"unparseable completion body: {exc!r}") from None
    if content is None or not isinstance(content, str):
        raise ProtocolError("completion content is not text")
    if not content.strip():
        raise EmptyResponseError("completion content is empty")
    usage = data.get("usage") if isinstance(data, dict) else None
    return content, usage if isinstance(usage, dict) else {}


class LiveBackend:
    def __init__(self, cfg, client=None, sleep=time.sleep, rng=None):
        self.cfg = cfg
        self._client = client or httpx.Client(timeout=cfg.timeout)
        self._owns_client = client is None
        self._sleep = sleep
        self._rng = rng or random.Random()

    def headers(self):
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.cfg.api_key_env)
        if key:
            headers[self.cfg.auth_header] = f"{self.cfg.auth_scheme} {key}".strip() if self.cfg.auth_scheme else key
        return headers

    def backoff(self, attempt, retry_after=None):
        if retry_after is not None:
            return min(self.cfg.backoff_cap, retry_after)
        ceiling = min(self.cfg.backoff_cap, self.cfg.backoff_base * 2**attempt)
        return ceiling * (0.5 + 0.5 * self._rng.random())

    def _once(self, payload):
        try:
            resp = self._client.post(self.cfg.endpoint_url, json=payload, headers=self.headers(), timeout=self.cfg.timeout)
        except httpx.TransportError as exc:
            raise _Retryable(f"transport failure: {exc!r}") from None
        if resp.status_code in _RETRY_STATUS:
            retry_after = resp.headers.get("retry-after")
            try:
                retry_after = float(retry_after) if retry_after is not None else None
            except ValueError:
                retry_after = None
            raise _Retryable(f"HTTP {resp.status_code}", retry_after)
        if resp.status_code >= 400:
            raise ProtocolError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        return parse_completion_body(resp.text)

    def __call__(self, messages, cfg):
        payload = {
            "model": cfg.model_name,
            "messages": messages,
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_output_tokens,
        }
        last = None
        for attempt in range(cfg.max_retries + 1):
            try:
                content, usage = self._once(payload)
                return Completion(content, usage, attempt + 1, "live", cfg.model_name)
            except _Retryable as exc:
                last = exc
                if attempt < cfg.max_retries:
                    self._sleep(self.backoff(attempt, exc.retry_after))
        raise TransportError(f"gave up after {cfg.max_retries + 1} attempts: {last}")

    def close(self):
        if self._owns_client:
            self._client.close()


# ---------------------------------------------------------------- gateway


class Gateway:
    """Thread-safe front door; caps concurrently outstanding requests at ``max_in_flight``."""

    def __init__(self, cfg=None, responder=None, client=None, sleep=time.sleep):
        self.cfg = cfg or GatewayConfig()
        if self.cfg.backend == "mock":
            self.backend = MockBackend(responder)
        else:
            self.backend = LiveBackend(self.cfg, client=client, sleep=sleep)
        self._slots = threading.BoundedSemaphore(self.cfg.max_in_flight)
        self._lock = threading.Lock()
        self.in_flight = 0
        self.peak_in_flight = 0
        self.requests = 0

    def complete(self, history):
        history = check_history(history)
        messages = [t.to_message() for t in history]
        with self._slots:
            with self._lock:
                self.in_flight += 1
                self.requests += 1
                self.peak_in_flight = max(self.peak_in_flight, self.in_flight)
            try:
                return self.backend(messages, self.cfg)
            finally:
                with self._lock:
                    self.in_flight -= 1

    def close(self):
        if hasattr(self.backend, "close"):
            self.backend.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


_shared = {}
_shared_lock = threading.Lock()


def gateway_for(cfg):
    """One shared gateway per configuration so the in-flight cap spans callers."""
    with _shared_lock:
        gw = _shared.get(cfg)
        if gw is None:
            gw = _shared[cfg] = Gateway(cfg)
        return gw


def complete_chat(history, cfg=None, gateway=None):
    gw = gateway or gateway_for(cfg or GatewayConfig())
    return gw.complete(history)


# ---------------------------------------------------------------- two-stage chain

_FENCE = re.compile(r"```[A-Za-z0-9_-]*\s*\n?(.*?)```", re.S)


def strip_fences(text):
    m = _FENCE.search(text)
    return m.group(1) if m else text


def first_json_object(text):
    """Decode the first balanced ``{...}`` object in ``text``, or return None."""
    decoder = json.JSONDecoder()
    idx = text.find("{")
    while idx != -1:
        try:
            obj, _ = decoder.raw_decode(text, idx)
            if isinstance(obj, dict):
                return obj
        except ValueError:
            pass
        idx = text.find("{", idx + 1)
    return None


def extract_feedback(text):
    """Return ``(feedback, status)``; status is ``ok`` or ``fallback``."""
    obj = first_json_object(strip_fences(text))
    if obj is not None:
        for value in obj.values():
            if isinstance(value, str) and value.strip():
                return value.strip(), "ok"
    return text.strip(), "fallback"


@dataclass
class TwoStageResult:
    selection_response: str
    presentation_response: str
    parsed_feedback: str
    parse_status: str
    history: list
    usage: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "selection_response": self.selection_response,
            "presentation_response": self.presentation_response,
            "parsed_feedback": self.parsed_feedback,
            "parse_status": self.parse_status,
            "history": [t.to_message() for t in self.history],
            "usage": self.usage,
        }


def run_two_stage(selection_prompt, presentation_prompt, cfg=None, gateway=None):
    if not selection_prompt.strip() or not presentation_prompt.strip():
        raise InvalidArgumentError("both prompts must be non-empty")
    gw = gateway or gateway_for(cfg or GatewayConfig())
    first = [ChatTurn("user", selection_prompt)]
    try:
        r1 = gw.complete(first)
    except Exception as exc:
        raise StageError("selection", exc) from exc
    second = first + [ChatTurn("assistant", r1.text), ChatTurn("user", presentation_prompt)]
    try:
        r2 = gw.complete(second)
    except Exception as exc:
        raise StageError("presentation", exc) from exc
    feedback, status = extract_feedback(r2.text)
    return TwoStageResult(
        r1.text,
        r2.text,
        feedback,
        status,
        second + [ChatTurn("assistant", r2.text)],
        {"selection": r1.usage, "presentation": r2.usage},
    )
