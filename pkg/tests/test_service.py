import json

import pytest

from kpx.embeddings import EmbeddingError
from kpx.service import ServiceClient, ServiceError, ServiceProvider


class FakeResponse:
    def __init__(self, status_code, payload):
        self.status_code = status_code
        self._payload = payload
        self.text = json.dumps(payload)

    def json(self):
        return self._payload


class FakeSession:
    """Scripted responses for post(); get() serves health."""

    def __init__(self, script):
        self.script = list(script)
        self.posts = []

    def post(self, url, json=None, timeout=None):
        self.posts.append({"url": url, "json": json})
        action = self.script.pop(0)
        if isinstance(action, Exception):
            raise action
        return action


def make_client(script, retries=2):
    client = ServiceClient("http://svc.test", retries=retries)
    client._session = FakeSession(script)
    return client


class TestRetries:
    def test_transient_5xx_then_success(self):
        ok = FakeResponse(200, {"scores": [0.5]})
        client = make_client([FakeResponse(500, {}), ok])
        assert client.quality(["text"]) == [0.5]
        assert len(client._session.posts) == 2

    def test_gives_up_after_retries(self):
        client = make_client([FakeResponse(500, {})] * 3, retries=2)
        with pytest.raises(ServiceError, match="unavailable"):
            client.quality(["text"])
        assert len(client._session.posts) == 3  # initial + 2 retries

    def test_4xx_not_retried(self):
        client = make_client([FakeResponse(400, {"detail": "bad"})])
        with pytest.raises(ServiceError, match="HTTP 400"):
            client.quality(["text"])
        assert len(client._session.posts) == 1

    def test_connection_error_retried(self):
        import requests
        ok = FakeResponse(200, {"scores": [1.0]})
        client = make_client([requests.ConnectionError("refused"), ok])
        assert client.quality(["text"]) == [1.0]


class TestEmbedBatching:
    def test_batches_capped_at_64(self):
        texts = [f"t{i}" for i in range(150)]
        responses = [
            FakeResponse(200, {"vectors": [[1.0, 0.0]] * 64}),
            FakeResponse(200, {"vectors": [[1.0, 0.0]] * 64}),
            FakeResponse(200, {"vectors": [[1.0, 0.0]] * 22}),
        ]
        client = make_client(responses)
        vectors = client.embed(texts)
        assert len(vectors) == 150
        sizes = [len(p["json"]["texts"]) for p in client._session.posts]
        assert sizes == [64, 64, 22]

    def test_count_mismatch_rejected(self):
        client = make_client([FakeResponse(200, {"vectors": [[1.0]]})])
        with pytest.raises(ServiceError, match="count"):
            client.embed(["a", "b"])


class TestProvider:
    def test_duplicate_texts_sent_once_and_share_vectors(self):
        response = FakeResponse(200, {"vectors": [[1.0, 0.0], [0.0, 1.0]]})
        client = make_client([response])
        provider = ServiceProvider(client)
        store = provider.embed([("id1", "same text"), ("id2", "same text"),
                                ("id3", "other text")])
        sent = client._session.posts[0]["json"]["texts"]
        assert sorted(sent) == ["other text", "same text"]
        assert list(store.vector("id1")) == list(store.vector("id2"))

    def test_store_validates_vectors(self):
        bad = FakeResponse(200, {"vectors": [[1.0, 0.0], [1.0]]})
        client = make_client([bad])
        with pytest.raises(EmbeddingError):
            ServiceProvider(client).embed([("a", "x"), ("b", "y")])


def test_client_requires_some_url(monkeypatch):
    monkeypatch.delenv("KPX_MODEL_URL", raising=False)
    with pytest.raises(ServiceError, match="KPX_MODEL_URL"):
        ServiceClient()
