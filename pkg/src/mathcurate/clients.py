"""Pluggable external clients: chat-completion models, embedders, language id.

Every model call goes through ``complete(prompt, key)``. The key names the
call site (e.g. "classify:proof:<record id>") so mock clients can reply
deterministically and the reply cache can persist across resumed runs.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np

logger = logging.getLogger(__name__)


class TransportError(RuntimeError):
    """Endpoint unreachable or exhausted after retries."""


class ModelClient(Protocol):
    def complete(self, prompt: str, key: str = "") -> str: ...


class EmbeddingClient(Protocol):
    def embed(self, texts: Sequence[str]) -> list[list[float]]: ...


class LanguageClassifier(Protocol):
    def top_language(self, text: str) -> str: ...


def _hash64(*parts: str) -> int:
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(part.encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "big")


def prompt_fingerprint(prompt: str) -> str:
    return hashlib.blake2b(prompt.encode("utf-8"), digest_size=8).hexdigest()


class MockModelClient:
    """Deterministic stand-in for a live endpoint.

    Handlers map key prefixes to reply builders; unmatched keys fall back to
    a seeded pseudo-random "yes"/"no". Identical (prompt, key, seed) always
    produce identical replies.
    """

    def __init__(
        self,
        seed: int = 0,
        handlers: dict[str, Callable[[str, str], str]] | None = None,
        positive_rate: float = 0.05,
    ):
        self.seed = seed
        self.handlers = handlers or {}
        self.positive_rate = positive_rate
        self.calls = 0

    def uniform(self, key: str) -> float:
        return _hash64(str(self.seed), key) / 2**64

    def complete(self, prompt: str, key: str = "") -> str:
        self.calls += 1
        for prefix, handler in self.handlers.items():
            if key.startswith(prefix):
                return handler(prompt, key)
        positive = self.uniform(key or prompt) < self.positive_rate
        if key.startswith("classify:true_false"):
            return "true" if positive else "false"
        return "yes" if positive else "no"


class ScriptedModelClient:
    """Replays canned replies for tests.

    Exact-key replies take precedence; otherwise the first script entry whose
    needle occurs in the prompt wins; otherwise the default (or an error when
    no default is configured).
    """

    def __init__(
        self,
        script: Sequence[tuple[str, str]] = (),
        by_key: dict[str, str] | None = None,
        default: str | None = None,
    ):
        self.script = list(script)
        self.by_key = by_key or {}
        self.default = default
        self.calls = 0

    def complete(self, prompt: str, key: str = "") -> str:
        self.calls += 1
        if key in self.by_key:
            return self.by_key[key]
        for needle, reply in self.script:
            if needle in prompt:
                return reply
        if self.default is None:
            raise AssertionError(f"no scripted reply for key={key!r}")
        return self.default


class HttpModelClient:
    """Minimal chat-completion-style HTTP client: prompt in, text out.

    The auth token is read from an environment variable at call time; retries
    use exponential backoff and end in TransportError.
    """

    def __init__(
        self,
        endpoint: str,
        model_name: str = "",
        auth_env: str = "MATHCURATE_API_TOKEN",
        temperature: float | None = None,
        top_p: float | None = None,
        retries: int = 2,
        min_request_interval: float = 0.0,
        timeout: float = 120.0,
    ):
        self.endpoint = endpoint
        self.model_name = model_name
        self.auth_env = auth_env
        self.temperature = temperature
        self.top_p = top_p
        self.retries = retries
        self.min_request_interval = min_request_interval
        self.timeout = timeout
        self._lock = threading.Lock()
        self._last_request = 0.0

    def _throttle(self) -> None:
        if self.min_request_interval <= 0:
            return
        with self._lock:
            wait = self._last_request + self.min_request_interval - time.monotonic()
            if wait > 0:
                time.sleep(wait)
            self._last_request = time.monotonic()

    def _payload(self, prompt: str) -> dict:
        payload: dict = {"messages": [{"role": "user", "content": prompt}]}
        if self.model_name:
            payload["model"] = self.model_name
        if self.temperature is not None:
            payload["temperature"] = self.temperature
        if self.top_p is not None:
            payload["top_p"] = self.top_p
        return payload

    @staticmethod
    def _extract_text(body: dict) -> str:
        choices = body.get("choices")
        if isinstance(choices, list) and choices:
            first = choices[0]
            message = first.get("message")
            if isinstance(message, dict) and "content" in message:
                return message["content"]
            if "text" in first:
                return first["text"]
        for field in ("text", "completion", "output"):
            if isinstance(body.get(field), str):
                return body[field]
        raise TransportError("unrecognized completion response shape")

    def complete(self, prompt: str, key: str = "") -> str:
        import requests

        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.auth_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            self._throttle()
            try:
                response = requests.post(
                    self.endpoint, json=self._payload(prompt), headers=headers, timeout=self.timeout
                )
                response.raise_for_status()
                return self._extract_text(response.json())
            except Exception as exc:
                last_error = exc
                logger.warning("model request failed (attempt %d): %s", attempt + 1, exc)
                time.sleep(min(2**attempt, 30) * 0.5)
        raise TransportError(f"model endpoint failed after {self.retries + 1} attempts: {last_error}")


class ReplyCache:
    """Append-only key -> reply store persisted as JSONL."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._entries: dict[str, str] = {}
        if self.path.exists():
            with open(self.path, "r", encoding="utf-8") as f:
                for line in f:
                    obj = json.loads(line)
                    self._entries[obj["key"]] = obj["reply"]

    def get(self, key: str) -> str | None:
        return self._entries.get(key)

    def put(self, key: str, reply: str) -> None:
        with self._lock:
            if key in self._entries:
                return
            self._entries[key] = reply
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(json.dumps({"key": key, "reply": reply}, ensure_ascii=False) + "\n")


class CachedModelClient:
    """Caches replies by (call key, prompt fingerprint); a prompt-template
    edit therefore invalidates stale verdicts automatically."""

    def __init__(self, inner: ModelClient, cache: ReplyCache):
        self.inner = inner
        self.cache = cache

    def complete(self, prompt: str, key: str = "") -> str:
        cache_key = f"{key}|{prompt_fingerprint(prompt)}"
        hit = self.cache.get(cache_key)
        if hit is not None:
            return hit
        reply = self.inner.complete(prompt, key=key)
        self.cache.put(cache_key, reply)
        return reply


class MockEmbeddingClient:
    """Hash-seeded unit vectors; identical texts embed identically."""

    def __init__(self, dim: int = 64, seed: int = 0):
        self.dim = dim
        self.seed = seed

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        out = []
        for text in texts:
            rng = np.random.default_rng(_hash64(str(self.seed), text))
            vec = rng.standard_normal(self.dim)
            vec /= np.linalg.norm(vec)
            out.append(vec.tolist())
        return out


class HttpEmbeddingClient:
    """Embeddings-endpoint client mirroring the completion client's contract."""

    def __init__(self, endpoint: str, model_name: str = "", auth_env: str = "MATHCURATE_API_TOKEN",
                 retries: int = 2, timeout: float = 120.0):
        self.endpoint = endpoint
        self.model_name = model_name
        self.auth_env = auth_env
        self.retries = retries
        self.timeout = timeout

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        import requests

        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.auth_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        payload: dict = {"input": list(texts)}
        if self.model_name:
            payload["model"] = self.model_name
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                response = requests.post(self.endpoint, json=payload, headers=headers, timeout=self.timeout)
                response.raise_for_status()
                body = response.json()
                return [item["embedding"] for item in body["data"]]
            except Exception as exc:
                last_error = exc
                time.sleep(min(2**attempt, 30) * 0.5)
        raise TransportError(f"embedding endpoint failed: {last_error}")


class MockLanguageClassifier:
    """Always answers with one fixed label."""

    def __init__(self, label: str = "en"):
        self.label = label

    def top_language(self, text: str) -> str:
        return self.label


class HeuristicLanguageClassifier:
    """Deterministic offline stand-in: English iff most letters are ASCII."""

    def top_language(self, text: str) -> str:
        letters = [c for c in text if c.isalpha()]
        if not letters:
            return "en"
        ascii_share = sum(1 for c in letters if c.isascii()) / len(letters)
        return "en" if ascii_share >= 0.5 else "other"


def parallel_map(fn: Callable, items: Iterable, workers: int = 1) -> list:
    """Order-preserving map, threaded when workers > 1."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
