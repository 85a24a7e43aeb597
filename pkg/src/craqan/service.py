"""HTTP API over the review store.

Thin JSON layer: all state semantics live in ReviewStore; this module maps
store methods to endpoints and store exceptions to {error_code, message}
bodies. Mutations are acknowledged only after the store has durably logged
them.
"""

from __future__ import annotations

import glob
import json
import logging
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .rci import OUTCOME_ACCEPTED, RciTranscript
from .store import (
    DecisionValidationError,
    DuplicateDecision,
    HumanDecision,
    ItemFinalized,
    NotFound,
    REJECTION_TAXONOMY,
    ReviewStore,
    ReviewStoreError,
    STATUSES,
)

logger = logging.getLogger(__name__)

_STATUS_CODES = {
    NotFound: 404,
    DuplicateDecision: 409,
    ItemFinalized: 409,
    DecisionValidationError: 422,
}


class DecisionBody(BaseModel):
    reviewer_id: str
    verdict: str
    reason_category: str | None = None
    free_text: str | None = None


def load_transcripts(output_dir: str | Path) -> list[RciTranscript]:
    transcripts = []
    for path in sorted(glob.glob(str(Path(output_dir) / "rci_*.jsonl"))):
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                if line.strip():
                    transcripts.append(RciTranscript.from_dict(json.loads(line)))
    return transcripts


def auto_enqueue(store: ReviewStore, output_dir: str | Path) -> int:
    """Register every transcript as an attempt and queue the accepted ones."""
    enqueued = 0
    for transcript in load_transcripts(output_dir):
        run_id = str(transcript.run_metadata.get("run_id", "run"))
        store.record_attempt(run_id, transcript.section_id, transcript.outcome)
        if transcript.outcome == OUTCOME_ACCEPTED:
            store.enqueue(transcript)
            enqueued += 1
    return enqueued


def create_app(store: ReviewStore, export_dir: str | Path | None = None, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="review-service")

    @app.exception_handler(ReviewStoreError)
    async def store_error_handler(_request: Request, exc: ReviewStoreError):
        status = _STATUS_CODES.get(type(exc), 400)
        return JSONResponse(
            status_code=status, content={"error_code": exc.error_code, "message": str(exc)}
        )

    @app.exception_handler(RequestValidationError)
    async def body_error_handler(_request: Request, exc: RequestValidationError):
        # keep the documented error envelope even for malformed bodies
        return JSONResponse(
            status_code=422, content={"error_code": "validation_error", "message": str(exc.errors())}
        )

    @app.get("/api/queue")
    def queue(status: str = "pending"):
        wanted = None if status == "all" else status
        if wanted is not None and wanted not in STATUSES:
            raise DecisionValidationError(f"unknown status {status!r}")
        return {"items": [item.summary_dict() for item in store.items(status=wanted)]}

    @app.get("/api/items/{item_id}")
    def item(item_id: str):
        return store.get(item_id).full_dict()

    @app.post("/api/items/{item_id}/decisions")
    def decide(item_id: str, body: DecisionBody):
        decision = HumanDecision(
            reviewer_id=body.reviewer_id,
            verdict=body.verdict,
            reason_category=body.reason_category,
            free_text=body.free_text,
        )
        updated = store.record_decision(item_id, decision)
        return updated.full_dict()

    @app.get("/api/taxonomy")
    def taxonomy():
        return {"categories": list(REJECTION_TAXONOMY)}

    @app.get("/api/stats")
    def stats():
        return store.stats_snapshot()

    @app.post("/api/export")
    def export():
        store.dedup()
        result = store.export_dataset(export_dir)
        return {
            "release_path": str(result.release_path),
            "meta_path": str(result.meta_path),
            "record_count": result.record_count,
        }

    if static_dir and Path(static_dir).is_dir():
        app.mount("/app", StaticFiles(directory=str(static_dir), html=True), name="app")

    return app


def serve(
    store_dir: str | Path,
    port: int = 8571,
    host: str = "127.0.0.1",
    output_dir: str | Path | None = None,
    static_dir: str | Path | None = None,
) -> None:
    """Run the review service until interrupted. Accepted transcripts found in
    output_dir are auto-enqueued at startup."""
    import uvicorn

    store = ReviewStore(store_dir)
    if output_dir and Path(output_dir).exists():
        count = auto_enqueue(store, output_dir)
        print(f"auto-enqueued {count} accepted transcript(s) from {output_dir}")
    app = create_app(store, export_dir=store_dir, static_dir=static_dir)
    print(f"review service on http://{host}:{port}")
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        store.close()
