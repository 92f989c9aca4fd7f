"""FastAPI application wrapping the core package.

Pipeline operations run against server-local paths; the review API serves
the relabeling workflow over a loaded dataset, with the review UI bundle
statically hosted at the root.
"""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import FileResponse, HTMLResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles

from .. import ops
from ..annotations import AnnotationError, FaceId, format_relabel_diff
from ..evaluation import EvaluationUsageError, report_to_json_obj
from ..review import ReviewAction, ReviewItem, ReviewStore, UnknownFaceError
from . import schemas

PLACEHOLDER_PAGE = """<!doctype html>
<html><head><title>maskpipe review</title></head>
<body>
<h1>maskpipe service</h1>
<p>No review UI bundle is configured. The JSON API is live; see
<a href="/docs">/docs</a> and <a href="/api/progress">/api/progress</a>.</p>
</body></html>
"""


def _item_model(item: ReviewItem) -> schemas.ReviewItemModel:
    return schemas.ReviewItemModel(
        face_id=str(item.face_id),
        frame_id=item.frame_id,
        box=tuple(item.box.as_list()),
        context_box=tuple(item.context_box.as_list()),
        current_label=item.current_label.value,
        image_url=item.image_url,
        status=item.status,
    )


def create_app(
    review_store: ReviewStore | None = None,
    ui_dir: Path | str | None = None,
) -> FastAPI:
    app = FastAPI(title="maskpipe", version="0.1.0")
    app.state.review_store = review_store
    app.state.decision_lock = threading.Lock()

    def store() -> ReviewStore:
        if app.state.review_store is None:
            raise HTTPException(503, "no dataset loaded for review")
        return app.state.review_store

    # --- review workflow -----------------------------------------------

    @app.get("/api/items", response_model=list[schemas.ReviewItemModel])
    def list_items(
        status: str | None = Query(default="pending"),
        count: int = Query(default=20, ge=1, le=500),
    ):
        s = store()
        if status == "pending":
            items = s.next_items(count)
        else:
            items = s.items(status=None if status in (None, "all") else status, count=count)
        return [_item_model(i) for i in items]

    @app.get("/api/items/{face_id}", response_model=schemas.ReviewItemModel)
    def get_item(face_id: str):
        try:
            return _item_model(store().get_item(FaceId.parse(face_id)))
        except (UnknownFaceError, AnnotationError):
            raise HTTPException(404, f"unknown face {face_id}")

    @app.post("/api/items/{face_id}/decision", response_model=schemas.DecisionAck)
    def post_decision(face_id: str, body: schemas.DecisionRequest):
        s = store()
        try:
            fid = FaceId.parse(face_id)
        except AnnotationError:
            raise HTTPException(404, f"unknown face {face_id}")
        with app.state.decision_lock:
            try:
                record, duplicate = s.record_decision(
                    fid, ReviewAction(body.action), body.reviewer
                )
            except UnknownFaceError:
                raise HTTPException(404, f"unknown face {face_id}")
        return schemas.DecisionAck(
            face_id=str(record.face_id),
            action=record.action.value,
            reviewer=record.reviewer,
            timestamp=record.timestamp,
            duplicate=duplicate,
        )

    @app.get("/api/export")
    def export_diff():
        text = format_relabel_diff(store().export_diff())
        return PlainTextResponse(
            text,
            media_type="text/plain; charset=utf-8",
            headers={"Content-Disposition": 'attachment; filename="relabel.diff"'},
        )

    @app.get("/api/progress", response_model=schemas.ProgressModel)
    def progress():
        return schemas.ProgressModel(**store().progress())

    @app.get("/media/{frame_id}")
    def media(frame_id: str):
        path = store().images.get(frame_id)
        if path is None or not Path(path).exists():
            raise HTTPException(404, f"no image for frame {frame_id}")
        return FileResponse(path)

    # --- pipeline operations --------------------------------------------

    def _guard(fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except FileNotFoundError as exc:
            raise HTTPException(404, str(exc))
        except (AnnotationError, EvaluationUsageError, ValueError) as exc:
            raise HTTPException(400, str(exc))

    @app.post("/api/stats", response_model=schemas.StatsResponse)
    def stats(body: schemas.StatsRequest):
        result, loaded = _guard(ops.op_stats, body.dataset_dir, body.format)
        return schemas.StatsResponse(
            **result.to_json_obj(), warnings=loaded.warnings, errors=loaded.errors
        )

    @app.post("/api/detect", response_model=schemas.DetectResponse)
    def detect(body: schemas.DetectRequest):
        outcome = _guard(
            ops.op_detect, body.input_dir, body.config_path, body.workers, body.out_path
        )
        return schemas.DetectResponse(
            n_frames=outcome.n_frames,
            n_predictions=len(outcome.predictions),
            predictions=[
                schemas.PredictionModel(
                    frame_id=p.frame_id,
                    box=tuple(p.box.as_list()),
                    label=p.label.value,
                    confidence=p.confidence,
                )
                for p in outcome.predictions
            ],
            out_path=body.out_path,
        )

    @app.post("/api/evaluate", response_model=schemas.EvalReportModel)
    def evaluate_endpoint(body: schemas.EvaluateRequest):
        report, _ = _guard(
            ops.op_evaluate,
            body.dataset_dir,
            body.format,
            body.predictions_path,
            body.relabel_path,
            body.iou_threshold,
        )
        return schemas.EvalReportModel(**report_to_json_obj(report))

    @app.post("/api/monitor", response_model=schemas.MonitorResponse)
    def monitor(body: schemas.MonitorRequest):
        points = _guard(
            ops.op_monitor,
            body.frames_dir,
            body.window_seconds,
            body.config_path,
            body.workers,
        )
        return schemas.MonitorResponse(
            points=[
                schemas.RatePointModel(
                    window_start=p.window_start,
                    window_end=p.window_end,
                    n_faces=p.n_faces,
                    n_masked=p.n_masked,
                    rate=p.rate,
                )
                for p in points
            ]
        )

    @app.post("/api/relabel/apply", response_model=schemas.RelabelApplyResponse)
    def relabel_apply(body: schemas.RelabelApplyRequest):
        summary = _guard(
            ops.op_relabel_apply, body.dataset_dir, body.format, body.diff_path, body.out_dir
        )
        return schemas.RelabelApplyResponse(
            n_set_mask=summary.n_set_mask,
            n_set_no_mask=summary.n_set_no_mask,
            n_removed=summary.n_removed,
            out_dir=summary.out_dir,
        )

    @app.post("/api/relabel/diff", response_model=schemas.RelabelDiffResponse)
    def relabel_diff(body: schemas.RelabelDiffRequest):
        diff = _guard(ops.op_relabel_diff, body.dir_a, body.dir_b, body.format, body.out_path)
        return schemas.RelabelDiffResponse(
            n_entries=len(diff), diff_text=format_relabel_diff(diff)
        )

    # --- UI hosting -------------------------------------------------------

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    else:

        @app.get("/", response_class=HTMLResponse)
        def index():
            return PLACEHOLDER_PAGE

    return app
