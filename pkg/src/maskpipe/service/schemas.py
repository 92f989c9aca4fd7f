"""Pydantic request/response models for the HTTP API."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

Box = tuple[float, float, float, float]


class ReviewItemModel(BaseModel):
    face_id: str
    frame_id: str
    box: Box
    context_box: Box
    current_label: Literal["Mask", "NoMask"]
    image_url: str
    status: Literal["pending", "decided"]


class DecisionRequest(BaseModel):
    action: Literal["SetMask", "SetNoMask", "Remove", "Keep"]
    reviewer: str = Field(min_length=1)


class DecisionAck(BaseModel):
    face_id: str
    action: str
    reviewer: str
    timestamp: float
    duplicate: bool


class ProgressModel(BaseModel):
    pending: int
    decided: int
    total: int


class PredictionModel(BaseModel):
    frame_id: str
    box: Box
    label: Literal["Mask", "NoMask"]
    confidence: float


class StatsRequest(BaseModel):
    dataset_dir: str
    format: Literal["aizoo", "moxa3k"] = "aizoo"


class StatsResponse(BaseModel):
    n_images: int
    n_faces: int
    n_mask: int
    n_no_mask: int
    fraction_no_mask: float
    warnings: list[str] = []
    errors: list[str] = []


class DetectRequest(BaseModel):
    input_dir: str
    config_path: Optional[str] = None
    workers: int = 1
    out_path: Optional[str] = None


class DetectResponse(BaseModel):
    n_frames: int
    n_predictions: int
    predictions: list[PredictionModel]
    out_path: Optional[str] = None


class ClassMetricsModel(BaseModel):
    precision: float
    recall: float
    f1: float
    average_precision: Optional[float]
    tp: int
    fp: int
    fn: int
    n_gt: int
    n_pred: int


class EvalReportModel(BaseModel):
    no_mask: ClassMetricsModel
    mask: ClassMetricsModel
    mAP: Optional[float]
    iou_threshold: float
    warnings: list[str] = []


class EvaluateRequest(BaseModel):
    dataset_dir: str
    format: Literal["aizoo", "moxa3k"] = "aizoo"
    predictions_path: str
    relabel_path: Optional[str] = None
    iou_threshold: float = 0.5


class MonitorRequest(BaseModel):
    frames_dir: str
    window_seconds: float = Field(gt=0)
    config_path: Optional[str] = None
    workers: int = 1


class RatePointModel(BaseModel):
    window_start: float
    window_end: float
    n_faces: int
    n_masked: int
    rate: Optional[float]


class MonitorResponse(BaseModel):
    points: list[RatePointModel]


class RelabelApplyRequest(BaseModel):
    dataset_dir: str
    format: Literal["aizoo", "moxa3k"] = "aizoo"
    diff_path: str
    out_dir: str


class RelabelApplyResponse(BaseModel):
    n_set_mask: int
    n_set_no_mask: int
    n_removed: int
    out_dir: str


class RelabelDiffRequest(BaseModel):
    dir_a: str
    dir_b: str
    format: Literal["aizoo", "moxa3k"] = "aizoo"
    out_path: Optional[str] = None


class RelabelDiffResponse(BaseModel):
    n_entries: int
    diff_text: str
