"""HTTP surface of the sidecar.

Endpoints (JSON in/out): POST /v1/embed, POST /v1/summarize,
POST /v1/quality, GET /v1/health. Handlers are stateless; responses are
pure functions of (request, model version) and always echo the model
version. Oversized embed requests are split internally at MAX_BATCH.
"""

from __future__ import annotations

import concurrent.futures
import os

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .backends import Backend, BackendUnavailable, backend_from_env

MAX_BATCH = 64
GEN_TIMEOUT_ENV = "EMBEDSVC_GEN_TIMEOUT"


class EmbedRequest(BaseModel):
    texts: list[str]
    model: str | None = None


class SummarizeRequest(BaseModel):
    text: str
    model: str | None = None
    max_tokens: int = 64


class QualityRequest(BaseModel):
    texts: list[str]


def create_app(backend: Backend | None = None) -> FastAPI:
    app = FastAPI(title="embedsvc")
    app.state.backend = backend or backend_from_env()
    timeout = float(os.environ.get(GEN_TIMEOUT_ENV, "120"))

    def _backend() -> Backend:
        return app.state.backend

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "models": _backend().models()}

    @app.post("/v1/embed")
    def embed(req: EmbedRequest):
        if not req.texts:
            raise HTTPException(status_code=400, detail="texts must be non-empty")
        if any(not t.strip() for t in req.texts):
            raise HTTPException(status_code=400, detail="texts entries must be non-empty")
        vectors: list[list[float]] = []
        version = ""
        try:
            for start in range(0, len(req.texts), MAX_BATCH):
                batch, version = _backend().embed(
                    req.texts[start:start + MAX_BATCH], req.model)
                vectors.extend(batch)
        except BackendUnavailable as e:
            raise HTTPException(status_code=503, detail=str(e)) from e
        return {"vectors": vectors, "dim": len(vectors[0]), "model_version": version}

    @app.post("/v1/summarize")
    def summarize(req: SummarizeRequest):
        if not req.text.strip():
            raise HTTPException(status_code=400, detail="text must be non-empty")
        if req.max_tokens < 8:
            raise HTTPException(status_code=400, detail="max_tokens must be >= 8")
        try:
            with concurrent.futures.ThreadPoolExecutor(max_workers=1) as pool:
                future = pool.submit(_backend().summarize, req.text,
                                     req.max_tokens, req.model)
                summary, version = future.result(timeout=timeout)
        except concurrent.futures.TimeoutError:
            raise HTTPException(status_code=504, detail="generation timed out") from None
        except BackendUnavailable as e:
            raise HTTPException(status_code=503, detail=str(e)) from e
        if not summary.strip():
            raise HTTPException(status_code=500, detail="backend produced an empty summary")
        return {"summary": summary, "model_version": version}

    @app.post("/v1/quality")
    def quality(req: QualityRequest):
        if not req.texts:
            raise HTTPException(status_code=400, detail="texts must be non-empty")
        if any(not t.strip() for t in req.texts):
            raise HTTPException(status_code=400, detail="texts entries must be non-empty")
        try:
            scores, version = _backend().quality(req.texts)
        except BackendUnavailable as e:
            raise HTTPException(status_code=503, detail=str(e)) from e
        return {"scores": scores, "model_version": version}

    return app


def serve() -> None:
    """Console entry point: honor the PORT env var."""
    import uvicorn
    port = int(os.environ.get("PORT", "8100"))
    uvicorn.run(create_app(), host="0.0.0.0", port=port)


app = create_app()

if __name__ == "__main__":
    serve()
