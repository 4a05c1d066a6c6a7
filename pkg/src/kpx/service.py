"""Client for the model sidecar (embeddings, abstractive summaries,
quality scores). The engine never runs neural inference itself; this
module is the only place that talks HTTP.

Base URL comes from ``KPX_MODEL_URL`` unless given explicitly. Requests
retry twice with exponential backoff and at most ``max_in_flight``
requests run concurrently.
"""

from __future__ import annotations

import logging
import os
import threading
import time
from typing import Sequence

import requests

from .embeddings import EmbeddingStore, build_store

log = logging.getLogger(__name__)

MODEL_URL_ENV = "KPX_MODEL_URL"
DEFAULT_TIMEOUT = 60.0
DEFAULT_RETRIES = 2
DEFAULT_MAX_IN_FLIGHT = 4
EMBED_BATCH = 64


class ServiceError(Exception):
    """Model service unreachable or returned an unusable response."""


def configured_url(explicit: str | None = None) -> str | None:
    return explicit or os.environ.get(MODEL_URL_ENV) or None


class ServiceClient:
    def __init__(
        self,
        base_url: str | None = None,
        timeout: float = DEFAULT_TIMEOUT,
        retries: int = DEFAULT_RETRIES,
        max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
    ):
        url = configured_url(base_url)
        if not url:
            raise ServiceError(
                f"no model service configured (set {MODEL_URL_ENV} or pass --model-url)")
        self.base_url = url.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self._gate = threading.BoundedSemaphore(max_in_flight)
        self._session = requests.Session()

    def _post(self, path: str, payload: dict) -> dict:
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(0.5 * 2 ** (attempt - 1))
            try:
                with self._gate:
                    resp = self._session.post(
                        f"{self.base_url}{path}", json=payload, timeout=self.timeout)
            except requests.RequestException as e:
                last_error = e
                log.warning("model service request %s failed (attempt %d): %s",
                            path, attempt + 1, e)
                continue
            if resp.status_code >= 500:
                last_error = ServiceError(f"{path} -> HTTP {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise ServiceError(f"{path} -> HTTP {resp.status_code}: {resp.text[:200]}")
            return resp.json()
        raise ServiceError(
            f"model service unavailable at {self.base_url}{path}: {last_error}. "
            "Fall back to an extractive summarizer or file-backed embeddings.")

    def health(self) -> dict:
        try:
            resp = self._session.get(f"{self.base_url}/v1/health", timeout=self.timeout)
            resp.raise_for_status()
            return resp.json()
        except requests.RequestException as e:
            raise ServiceError(f"model service health check failed: {e}") from e

    def embed(self, texts: Sequence[str], model: str | None = None) -> list[list[float]]:
        """Vectors for ``texts`` (order preserved); batching is capped at
        EMBED_BATCH per request."""
        out: list[list[float]] = []
        for start in range(0, len(texts), EMBED_BATCH):
            payload: dict = {"texts": list(texts[start:start + EMBED_BATCH])}
            if model:
                payload["model"] = model
            data = self._post("/v1/embed", payload)
            vectors = data.get("vectors")
            if not isinstance(vectors, list) or len(vectors) != len(payload["texts"]):
                raise ServiceError("embed response vector count does not match request")
            out.extend(vectors)
        return out

    def summarize(self, text: str, model: str | None, max_tokens: int) -> str:
        payload: dict = {"text": text, "max_tokens": max_tokens}
        if model:
            payload["model"] = model
        data = self._post("/v1/summarize", payload)
        summary = data.get("summary")
        if not isinstance(summary, str):
            raise ServiceError("summarize response missing 'summary'")
        return summary

    def quality(self, texts: Sequence[str]) -> list[float]:
        data = self._post("/v1/quality", {"texts": list(texts)})
        scores = data.get("scores")
        if not isinstance(scores, list) or len(scores) != len(texts):
            raise ServiceError("quality response score count does not match request")
        return [float(s) for s in scores]


class ServiceProvider:
    """Embedding provider backed by the sidecar. Duplicate texts are sent
    once; identical texts always map to identical vectors."""

    def __init__(self, client: ServiceClient, model: str | None = None):
        self.client = client
        self.model = model

    def embed(self, keyed_texts: Sequence[tuple[str, str]]) -> EmbeddingStore:
        unique: dict[str, list[float] | None] = {}
        for _, text in keyed_texts:
            unique.setdefault(text, None)
        texts = list(unique)
        vectors = self.client.embed(texts, model=self.model)
        by_text = dict(zip(texts, vectors))
        return build_store({key: by_text[text] for key, text in keyed_texts})
