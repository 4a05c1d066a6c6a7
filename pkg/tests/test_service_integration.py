"""Integration against a live model sidecar.

Runs only when KPX_MODEL_URL points at a healthy service; otherwise every
test here is skipped, keeping the main suite service-free.
"""

import os

import pytest

from conftest import make_judgment
from kpx.pipelines import MethodConfig, method2_extract
from kpx.service import MODEL_URL_ENV, ServiceClient, ServiceError, ServiceProvider
from kpx.summarize import SummaryRequest, abstractive_summarize


def _live_client():
    if not os.environ.get(MODEL_URL_ENV):
        pytest.skip(f"{MODEL_URL_ENV} not set; service integration skipped")
    client = ServiceClient()
    try:
        client.health()
    except ServiceError as e:
        pytest.skip(f"model service not reachable: {e}")
    return client


@pytest.fixture(scope="module")
def client():
    return _live_client()


def test_health_reports_models(client):
    body = client.health()
    assert body["status"] == "ok" and body["models"]


def test_embed_contract(client):
    texts = ["The detention was unlawful.", "Costs were awarded.",
             "The detention was unlawful."]
    vectors = client.embed(texts)
    assert len(vectors) == 3
    assert len({len(v) for v in vectors}) == 1
    assert vectors[0] == vectors[2]  # identical text, identical vector


def test_summarize_respects_cap(client):
    req = SummaryRequest(sentences=(
        "The applicant was detained without judicial review for months.",
        "No remedy was available during that period of detention.",
    ), budget=16)
    out = abstractive_summarize(req, None, client)
    assert out.kind == "abstractive" and out.text


def test_provider_backs_extraction(client):
    judgment = make_judgment("ji", [
        "The seizure of the papers lacked any judicial warrant at all.",
        "No warrant from a judge covered the seizure of those papers.",
        "The seizure of correspondence proceeded without any warrant.",
        "Costs were awarded against the respondent Government in equity.",
    ])
    provider = ServiceProvider(client)
    keyed = []
    for arg in judgment.premises:
        keyed.append((arg.id, arg.text.strip()))
        for s in arg.sentences:
            keyed.append((s.embedding_id, s.text.strip()))
    store = provider.embed(keyed)
    assert len(store) == len({k for k, _ in keyed})
    kps = method2_extract(judgment, store, MethodConfig(summarizer="abstractive"),
                          client=client)
    assert kps and all(kp.source == "generated" for kp in kps)


def test_quality_scores_in_range(client):
    scores = client.quality(["The detention was unlawful under Article 5."])
    assert len(scores) == 1 and 0.0 <= scores[0] <= 1.0
