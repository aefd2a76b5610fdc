"""Language-model backends behind a single non-streaming generation contract.

Two implementations ship: :class:`OllamaBackend` speaks the Ollama
``/api/generate`` wire protocol, and :class:`ScriptedBackend` replays canned
responses keyed by prompt for offline, deterministic runs.
"""

from __future__ import annotations

import enum
import json
import logging
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Protocol

import requests

from checksupport.errors import (
    AmbiguousScript,
    BackendUnavailable,
    GenerationTimeout,
    InvalidRequest,
    ModelNotFound,
    ServerError,
    UnscriptedPrompt,
    UsageError,
)

logger = logging.getLogger(__name__)

DEFAULT_BACKEND_URL = "http://localhost:11434"
DEFAULT_MODEL = "llama3.1"
DEFAULT_SEED = 0
DEFAULT_TIMEOUT_S = 120.0
ITEM_STOP = ("\n\n\n", "Checklist item:")


class Stage(enum.Enum):
    RECOMMEND = "recommend"
    GUIDANCE = "guidance"
    EXTRACT = "extract"
    ITEM_ANSWER = "item"


@dataclass(frozen=True)
class GenerationRequest:
    model: str
    prompt: str
    temperature: float
    stop: tuple[str, ...] = ()
    seed: int | None = DEFAULT_SEED
    max_tokens: int | None = None

    def __post_init__(self):
        if not self.prompt:
            raise InvalidRequest("prompt must be non-empty")
        if not 0.0 <= self.temperature <= 2.0:
            raise InvalidRequest(f"temperature {self.temperature} outside [0, 2]")
        if any(not s for s in self.stop):
            raise InvalidRequest("stop strings must be non-empty")
        if self.max_tokens is not None and self.max_tokens <= 0:
            raise InvalidRequest("max_tokens must be positive")
        object.__setattr__(self, "stop", tuple(self.stop))


@dataclass(frozen=True)
class GenerationResponse:
    text: str
    latency_ms: int = 0
    truncated_by_stop: bool = False


@dataclass(frozen=True)
class StageConfig:
    stage: Stage
    temperature: float
    context_limit_chars: int
    stop: tuple[str, ...] = ()
    min_extract_chars: int | None = None
    window_overlap: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise UsageError(f"{self.stage.value}: temperature {self.temperature} outside [0, 2]")
        if self.context_limit_chars <= 0:
            raise UsageError(f"{self.stage.value}: context limit must be positive")
        if self.stage is Stage.EXTRACT:
            if not self.min_extract_chars or self.min_extract_chars <= 0:
                raise UsageError("extract: min_extract_chars must be positive")
            if self.window_overlap is None or not 0 <= self.window_overlap < self.context_limit_chars:
                raise UsageError("extract: window overlap must be in [0, window size)")

    def to_dict(self) -> dict:
        return {
            "stage": self.stage.value,
            "temperature": self.temperature,
            "context_limit_chars": self.context_limit_chars,
            "stop": list(self.stop),
            "min_extract_chars": self.min_extract_chars,
            "window_overlap": self.window_overlap,
        }


def default_stage_configs() -> dict[Stage, StageConfig]:
    return {
        Stage.RECOMMEND: StageConfig(Stage.RECOMMEND, temperature=0.2, context_limit_chars=2000),
        # limit bounds the pass-1 overview embedded in each pass-2 prompt
        Stage.GUIDANCE: StageConfig(Stage.GUIDANCE, temperature=0.7, context_limit_chars=2000),
        Stage.EXTRACT: StageConfig(
            Stage.EXTRACT,
            temperature=0.3,
            context_limit_chars=5000,
            min_extract_chars=50,
            window_overlap=500,
        ),
        Stage.ITEM_ANSWER: StageConfig(
            Stage.ITEM_ANSWER, temperature=0.5, context_limit_chars=1000, stop=ITEM_STOP
        ),
    }


def with_overrides(configs: Mapping[Stage, StageConfig], overrides: Mapping[Stage, Mapping]) -> dict:
    """Copy ``configs`` with per-stage field overrides applied (and re-validated)."""
    out = dict(configs)
    for stage, values in overrides.items():
        out[stage] = replace(out[stage], **values)
    return out


def apply_stops(text: str, stops) -> tuple[str, bool]:
    """Cut ``text`` at the earliest occurrence of any stop string."""
    cut = min((i for i in (text.find(s) for s in stops) if i >= 0), default=-1)
    if cut < 0:
        return text, False
    return text[:cut], True


class Backend(Protocol):
    def generate(self, request: GenerationRequest) -> GenerationResponse: ...

    def describe(self) -> str: ...


def generate(backend: Backend, request: GenerationRequest) -> GenerationResponse:
    """Run one complete generation, enforcing that no stop string survives in the text."""
    response = backend.generate(request)
    text, cut = apply_stops(response.text, request.stop)
    if cut:
        response = replace(response, text=text, truncated_by_stop=True)
    return response


class OllamaBackend:
    """Synchronous client for an Ollama-compatible ``/api/generate`` endpoint.

    Args:
        base_url: server root, e.g. ``http://localhost:11434``.
        timeout: wall-clock limit per call, in seconds.
        max_in_flight: concurrent requests allowed against the server.
    """

    def __init__(
        self,
        base_url: str = DEFAULT_BACKEND_URL,
        timeout: float = DEFAULT_TIMEOUT_S,
        max_in_flight: int = 1,
        session: requests.Session | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._session = session or requests.Session()

    def describe(self) -> str:
        return f"ollama:{self.base_url}"

    def payload(self, request: GenerationRequest) -> dict:
        options: dict = {"temperature": request.temperature}
        if request.stop:
            options["stop"] = list(request.stop)
        if request.seed is not None:
            options["seed"] = request.seed
        if request.max_tokens is not None:
            options["num_predict"] = request.max_tokens
        return {"model": request.model, "prompt": request.prompt, "stream": False, "options": options}

    def _post(self, body: dict) -> requests.Response:
        url = f"{self.base_url}/api/generate"
        # one retry on transport failure, none on timeouts or HTTP errors
        for attempt in (1, 2):
            try:
                return self._session.post(url, json=body, timeout=self.timeout)
            except requests.Timeout as exc:
                raise GenerationTimeout(f"no response from {url} within {self.timeout}s") from exc
            except requests.ConnectionError as exc:
                if attempt == 2:
                    raise BackendUnavailable(f"cannot reach model server at {self.base_url}: {exc}") from exc
                logger.warning("transport error talking to %s, retrying once", url)
        raise AssertionError("unreachable")

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        body = self.payload(request)
        with self._slots:
            t0 = time.perf_counter()
            resp = self._post(body)
            latency = int((time.perf_counter() - t0) * 1000)
        if resp.status_code == 404:
            raise ModelNotFound(f"model {request.model!r} not available on {self.base_url}: {_error_text(resp)}")
        if resp.status_code >= 400:
            raise ServerError(f"model server returned HTTP {resp.status_code}: {_error_text(resp)}")
        try:
            text = resp.json()["response"]
        except (ValueError, KeyError, TypeError) as exc:
            raise ServerError("model server reply has no 'response' field") from exc
        text, cut = apply_stops(text, request.stop)
        return GenerationResponse(text=text, latency_ms=latency, truncated_by_stop=cut)

    def ping(self, timeout: float = 1.0) -> bool:
        try:
            return self._session.get(f"{self.base_url}/api/tags", timeout=timeout).ok
        except requests.RequestException:
            return False


def _error_text(resp: requests.Response) -> str:
    try:
        return str(resp.json().get("error", resp.text))
    except ValueError:
        return resp.text[:200]


class ScriptedBackend:
    """Replay backend: responses are a pure function of the prompt.

    A prompt matches its exact key if present, otherwise the single key that is
    a prefix of it. Several matching prefixes raise AmbiguousScript.
    """

    def __init__(self, script: Mapping[str, str], label: str = "scripted"):
        if any(not key for key in script):
            raise UsageError("script keys must be non-empty")
        self._script = dict(script)
        self.label = label

    @classmethod
    def from_file(cls, path) -> "ScriptedBackend":
        """Load a JSON object ``{prompt_key: response}`` or a list of ``{"prompt", "response"}``."""
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot load script {path}: {exc}") from exc
        if isinstance(data, list):
            data = {entry["prompt"]: entry["response"] for entry in data}
        return cls(data, label=f"scripted:{path.name}")

    def describe(self) -> str:
        return self.label

    def lookup(self, prompt: str) -> str:
        if prompt in self._script:
            return self._script[prompt]
        hits = [key for key in self._script if prompt.startswith(key)]
        if not hits:
            raise UnscriptedPrompt(f"no scripted response for prompt starting {prompt[:80]!r}")
        if len(hits) > 1:
            raise AmbiguousScript(f"{len(hits)} script keys are prefixes of the prompt: {sorted(hits)!r}")
        return self._script[hits[0]]

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        text, cut = apply_stops(self.lookup(request.prompt), request.stop)
        return GenerationResponse(text=text, latency_ms=0, truncated_by_stop=cut)


def scripted_backend(script: Mapping[str, str]) -> ScriptedBackend:
    return ScriptedBackend(script)


@dataclass
class RecordingBackend:
    """Wraps a backend and keeps every request it forwards, in call order."""

    inner: Backend
    requests: list[GenerationRequest] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def describe(self) -> str:
        return self.inner.describe()

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        with self._lock:
            self.requests.append(request)
        return self.inner.generate(request)

    @property
    def prompts(self) -> list[str]:
        return [r.prompt for r in self.requests]


def make_backend(target: str, timeout: float = DEFAULT_TIMEOUT_S) -> Backend:
    """Build a backend from ``scripted:<file>`` or an HTTP base URL."""
    if target.startswith("scripted:"):
        return ScriptedBackend.from_file(target[len("scripted:"):])
    if not target.startswith(("http://", "https://")):
        raise UsageError(f"backend must be an http(s) URL or scripted:<file>, got {target!r}")
    return OllamaBackend(target, timeout=timeout)
