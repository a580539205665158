"""Translation clients used for back-translation.

:class:`HttpTranslator` talks to a LibreTranslate-style endpoint (POST JSON
``{q, source, target}``, reply ``{"translatedText": ...}``) and keeps every
answer in a JSON Lines cache so reruns need no network. :class:`MockTranslator`
provides deterministic in-process doubles.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import requests

log = logging.getLogger(__name__)

API_KEY_ENV = "TRANSLATE_API_KEY"


class Translator(Protocol):
    def translate(self, text: str, source: str, target: str) -> str: ...


class TranslationError(RuntimeError):
    pass


class GatewayError(TranslationError):
    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class TranslationTimeout(TranslationError):
    pass


class ProtocolError(TranslationError):
    pass


class CacheMiss(TranslationError):
    """Raised in offline mode when a request is not in the cache."""


@dataclass
class GatewayConfig:
    base_url: str
    api_key: str | None = None
    timeout_ms: int = 10_000
    max_retries: int = 3
    max_in_flight: int = 4
    cache_path: str | None = None
    backoff_ms: int = 200
    offline: bool = False

    def __post_init__(self):
        if self.timeout_ms < 1:
            raise ValueError("timeout_ms must be >= 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if self.api_key is None:
            self.api_key = os.environ.get(API_KEY_ENV)


def cache_key(text: str, source: str, target: str) -> str:
    payload = json.dumps([text, source, target], ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class TranslationCache:
    """Append-only JSON Lines store keyed by ``cache_key``. Thread-safe."""

    def __init__(self, path: str | Path | None):
        self.path = Path(path) if path else None
        self._lock = threading.Lock()
        self._entries: dict[str, str] = {}
        if self.path is not None and self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        rec = json.loads(line)
                        self._entries[rec["key_hash"]] = rec["output"]

    def get(self, key: str) -> str | None:
        with self._lock:
            return self._entries.get(key)

    def put(self, key: str, text: str, source: str, target: str, output: str) -> None:
        with self._lock:
            if key in self._entries:
                return
            self._entries[key] = output
            if self.path is not None:
                rec = {"key_hash": key, "source": source, "target": target,
                       "input": text, "output": output}
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")

    def __len__(self) -> int:
        return len(self._entries)


class HttpTranslator:
    def __init__(self, cfg: GatewayConfig, session: requests.Session | None = None):
        self.cfg = cfg
        self.cache = TranslationCache(cfg.cache_path)
        self.session = session or requests.Session()
        self._slots = threading.BoundedSemaphore(cfg.max_in_flight)
        self._count_lock = threading.Lock()
        self.n_requests = 0
        self._jitter = random.Random()

    def translate(self, text: str, source: str, target: str) -> str:
        if not text:
            raise ValueError("cannot translate empty text")
        key = cache_key(text, source, target)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        if self.cfg.offline:
            raise CacheMiss(f"no cached translation for {source}->{target} request {key[:12]}")
        out = self._post(text, source, target)
        self.cache.put(key, text, source, target, out)
        return out

    def _sleep_before_retry(self, attempt: int) -> None:
        delay_ms = min(self.cfg.timeout_ms, self.cfg.backoff_ms * 2 ** attempt)
        time.sleep(delay_ms * self._jitter.uniform(0.5, 1.0) / 1000.0)

    def _post(self, text: str, source: str, target: str) -> str:
        body = {"q": text, "source": source, "target": target, "format": "text"}
        if self.cfg.api_key:
            body["api_key"] = self.cfg.api_key
        attempts = self.cfg.max_retries + 1
        for attempt in range(attempts):
            last = attempt == attempts - 1
            with self._slots:
                with self._count_lock:
                    self.n_requests += 1
                try:
                    resp = self.session.post(self.cfg.base_url, json=body,
                                             timeout=self.cfg.timeout_ms / 1000.0)
                except requests.Timeout as exc:
                    if last:
                        raise TranslationTimeout(f"timed out after {attempts} attempt(s)") from exc
                    resp = None
                except requests.ConnectionError as exc:
                    if last:
                        raise GatewayError(f"connection failed: {exc}") from exc
                    resp = None
            if resp is None:
                log.warning("translate %s->%s: attempt %d failed, retrying", source, target, attempt + 1)
                self._sleep_before_retry(attempt)
                continue
            if 200 <= resp.status_code < 300:
                return self._parse(resp)
            retryable = resp.status_code == 429 or resp.status_code >= 500
            if last or not retryable:
                raise GatewayError(f"translation service returned HTTP {resp.status_code}",
                                   status=resp.status_code)
            log.warning("translate %s->%s: HTTP %d, retrying", source, target, resp.status_code)
            self._sleep_before_retry(attempt)
        raise AssertionError("unreachable")

    @staticmethod
    def _parse(resp: requests.Response) -> str:
        try:
            payload = resp.json()
        except ValueError as exc:
            raise ProtocolError("response body is not JSON") from exc
        out = payload.get("translatedText") if isinstance(payload, dict) else None
        if not isinstance(out, str):
            raise ProtocolError("response lacks a string 'translatedText' field")
        return out


class MockTranslator:
    """Deterministic test double.

    ``identity`` returns its input; ``reverse_words`` reverses word order on
    every call, so a round trip restores the text; ``case_round_trip``
    uppercases when translating out of ``home`` and lowercases otherwise.
    """

    KINDS = ("identity", "reverse_words", "case_round_trip")

    def __init__(self, kind: str = "identity", home: str = "en"):
        if kind not in self.KINDS:
            raise ValueError(f"unknown mock translator {kind!r}; choose from {self.KINDS}")
        self.kind = kind
        self.home = home
        self.calls: list[tuple[str, str, str]] = []

    def translate(self, text: str, source: str, target: str) -> str:
        self.calls.append((text, source, target))
        if self.kind == "identity":
            return text
        if self.kind == "reverse_words":
            return " ".join(reversed(text.split()))
        return text.upper() if source == self.home else text.lower()


def mock_translator(kind: str) -> MockTranslator:
    return MockTranslator(kind)
