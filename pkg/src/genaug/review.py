"""Human curation service for generated images.

Reviewers page through a queue of generated records (with their gate
metadata), accept or reject each with reasons, and export curated
manifests. The verdict log is append-only JSON lines; the active state is
"latest verdict wins" and replaying the log from empty reconstructs it
exactly.

Desk tool: binds localhost by default, no auth.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException, Response
from pydantic import BaseModel

from genaug.errors import ValidationError
from genaug.manifest import (
    DatasetManifest,
    ImageRecord,
    manifest_to_json,
    record_from_json,
    record_to_json,
)
from genaug.raster import png_bytes, read_png, render_overlay

VERDICT_REASONS = ("annotation_mismatch", "unnatural_background",
                   "unrealistic_object", "other")


@dataclass(frozen=True)
class Verdict:
    image_id: str
    accepted: bool
    reasons: tuple[str, ...] = ()
    note: str = ""
    reviewer: str = ""
    timestamp: float = 0.0


@dataclass(frozen=True)
class QueueItem:
    record: ImageRecord
    gate: dict | None = None  # decision payload from the selection gate


@dataclass
class ReviewQueue:
    run_id: str
    items: tuple[QueueItem, ...]
    log_path: Path | None = None
    history: list[Verdict] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self) -> None:
        ids = [item.record.id for item in self.items]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate image ids in review queue")

    def item_by_id(self, image_id: str) -> QueueItem:
        for item in self.items:
            if item.record.id == image_id:
                return item
        raise KeyError(image_id)

    def active_verdicts(self) -> dict[str, Verdict]:
        active: dict[str, Verdict] = {}
        for v in self.history:
            active[v.image_id] = v
        return active

    def submit(self, verdict: Verdict) -> None:
        """Validate, append to the log (flushed), and update state."""
        self.item_by_id(verdict.image_id)  # KeyError if unknown
        for reason in verdict.reasons:
            if reason not in VERDICT_REASONS:
                raise ValidationError(
                    f"unknown reason {reason!r}; have {list(VERDICT_REASONS)}")
        with self._lock:
            self.history.append(verdict)
            if self.log_path is not None:
                with open(self.log_path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(_verdict_to_json(verdict), sort_keys=True) + "\n")
                    fh.flush()


def _verdict_to_json(v: Verdict) -> dict:
    return {
        "image_id": v.image_id,
        "accepted": v.accepted,
        "reasons": list(v.reasons),
        "note": v.note,
        "reviewer": v.reviewer,
        "timestamp": v.timestamp,
    }


def _verdict_from_json(data: dict) -> Verdict:
    return Verdict(
        image_id=str(data["image_id"]),
        accepted=bool(data["accepted"]),
        reasons=tuple(data.get("reasons", [])),
        note=str(data.get("note", "")),
        reviewer=str(data.get("reviewer", "")),
        timestamp=float(data.get("timestamp", 0.0)),
    )


def load_queue(path: str | Path, log_path: str | Path | None = None) -> ReviewQueue:
    """Load a queue file and replay any existing verdict log."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    items = tuple(QueueItem(record=record_from_json(item["record"]),
                            gate=item.get("gate"))
                  for item in data["items"])
    queue = ReviewQueue(run_id=str(data.get("run_id", "run")), items=items,
                        log_path=Path(log_path) if log_path else None)
    if log_path and Path(log_path).exists():
        for line in Path(log_path).read_text(encoding="utf-8").splitlines():
            if line.strip():
                queue.history.append(_verdict_from_json(json.loads(line)))
    return queue


def save_queue(queue: ReviewQueue, path: str | Path,
               domains: list[dict] | None = None) -> None:
    payload = {
        "run_id": queue.run_id,
        "domains": domains or [],
        "items": [{"record": record_to_json(item.record), "gate": item.gate}
                  for item in queue.items],
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def export_curated(queue: ReviewQueue, which: str = "accepted",
                   domains=()) -> DatasetManifest:
    """Manifest of queue records matching the filter.

    Filters other than "all" require every item reviewed; unreviewed ids
    are listed in the error.
    """
    if which not in ("accepted", "rejected", "all"):
        raise ValidationError(f"filter must be accepted|rejected|all, got {which!r}")
    active = queue.active_verdicts()
    if which != "all":
        unreviewed = [item.record.id for item in queue.items
                      if item.record.id not in active]
        if unreviewed:
            raise ValidationError(
                f"cannot export {which!r} with unreviewed items: "
                f"{', '.join(sorted(unreviewed))}")
    records = []
    for item in queue.items:
        verdict = active.get(item.record.id)
        if which == "all" or (verdict is not None and
                              verdict.accepted == (which == "accepted")):
            records.append(item.record)
    return DatasetManifest(records=tuple(records), domains=tuple(domains))


# ---------------------------------------------------------------------------
# HTTP service


class VerdictBody(BaseModel):
    image_id: str
    accepted: bool
    reasons: list[str] = []
    note: str = ""
    reviewer: str = ""


def make_review_app(queue: ReviewQueue, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="review service")

    @app.get("/queue")
    def get_queue() -> dict:
        active = queue.active_verdicts()
        items = []
        for item in queue.items:
            verdict = active.get(item.record.id)
            items.append({
                "image_id": item.record.id,
                "image_url": f"/image/{item.record.id}",
                "overlay_url": f"/overlay/{item.record.id}",
                "gate": item.gate,
                "verdict": _verdict_to_json(verdict) if verdict else None,
            })
        return {"run_id": queue.run_id, "items": items}

    @app.get("/image/{image_id}")
    def get_image(image_id: str) -> Response:
        try:
            item = queue.item_by_id(image_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown image {image_id!r}")
        return Response(content=png_bytes(read_png(item.record.path)),
                        media_type="image/png")

    @app.get("/overlay/{image_id}")
    def get_overlay(image_id: str) -> Response:
        try:
            item = queue.item_by_id(image_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown image {image_id!r}")
        img = read_png(item.record.path)
        overlay = render_overlay(img, item.record.annotations)
        return Response(content=png_bytes(overlay), media_type="image/png")

    @app.post("/verdict")
    def post_verdict(body: VerdictBody) -> dict:
        verdict = Verdict(
            image_id=body.image_id,
            accepted=body.accepted,
            reasons=tuple(body.reasons),
            note=body.note,
            reviewer=body.reviewer,
            timestamp=time.time(),
        )
        try:
            queue.submit(verdict)
        except KeyError:
            raise HTTPException(status_code=404,
                                detail=f"unknown image {body.image_id!r}")
        except ValidationError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        history_len = sum(1 for v in queue.history if v.image_id == body.image_id)
        return {"ok": True, "history_length": history_len}

    @app.get("/export")
    def get_export(filter: str = "accepted") -> dict:
        try:
            manifest = export_curated(queue, filter)
        except ValidationError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return manifest_to_json(manifest)

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app


def serve(queue: ReviewQueue, host: str = "127.0.0.1", port: int = 8601,
          static_dir: str | Path | None = None) -> None:
    import uvicorn

    app = make_review_app(queue, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port)
