"""HTTP scorer implementing the shared pair-scoring wire protocol.

    POST / (or /score)  {"pairs": [{"tokens": [...]} | {"left_text":..., "right_text":...}, ...]}
                        -> {"scores": [p, ...]}   same order, p in [0, 1]
    GET  /health        -> {"status": "ok", "model_digest": ..., "config": {...}}

Malformed requests produce a structured {"error": ...} body with a 4xx status
and the process stays up.
"""

from __future__ import annotations

import json

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .data import SidecarError, pair_texts
from .model import PairScorer


def build_app(scorer: PairScorer) -> FastAPI:
    app = FastAPI(title="varmatch-sidecar", docs_url=None, redoc_url=None)

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "model_digest": scorer.model_digest,
            "config": scorer.manifest.get("train_config", {}),
        }

    async def score_endpoint(request: Request):
        try:
            body = json.loads(await request.body() or b"null")
        except ValueError:
            return JSONResponse({"error": "request body is not valid JSON"}, status_code=400)
        if not isinstance(body, dict) or not isinstance(body.get("pairs"), list):
            return JSONResponse(
                {"error": "request must be an object with a 'pairs' array"}, status_code=400)
        try:
            texts = [pair_texts(pair) if isinstance(pair, dict) else None
                     for pair in body["pairs"]]
            if any(t is None for t in texts):
                return JSONResponse(
                    {"error": "every pair must be an object with tokens or texts"},
                    status_code=400)
            scores = scorer.score_texts(texts) if texts else []
        except SidecarError as exc:
            return JSONResponse({"error": str(exc)}, status_code=400)
        return {"scores": scores}

    app.post("/")(score_endpoint)
    app.post("/score")(score_endpoint)
    return app


def serve(checkpoint: str, host: str = "127.0.0.1", port: int = 8321) -> None:
    import uvicorn

    uvicorn.run(build_app(PairScorer(checkpoint)), host=host, port=port, log_level="warning")
