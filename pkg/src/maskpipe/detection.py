"""Multi-scale face detection: IoU, NMS, and pluggable detector backends.

Backends return detections in the original image frame (the backend owns
rescaling to and from its target scale) and must be deterministic for
identical inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np

from .annotations import BoundingBox
from .alignment import Landmarks5


class DetectionError(RuntimeError):
    """A detector backend failed; carries the scale that was running."""

    def __init__(self, scale: int, message: str):
        super().__init__(f"detector backend failed at scale {scale}: {message}")
        self.scale = scale


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    landmarks: Landmarks5
    score: float
    scale_origin: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score outside [0, 1]: {self.score}")


@runtime_checkable
class DetectorBackend(Protocol):
    """Contract for face detectors.

    detect_raw resizes internally so the image's long side equals
    target_scale and maps results back to original-image coordinates.
    Backends that are not safe for concurrent calls set thread_safe False
    and the pipeline serializes them.
    """

    thread_safe: bool

    def detect_raw(self, frame, target_scale: int) -> list[Detection]: ...


@dataclass(frozen=True)
class DetectionConfig:
    scales: tuple[int, ...] = (320, 640, 960)
    score_threshold: float = 0.8
    nms_iou: float = 0.5

    def __post_init__(self) -> None:
        if not self.scales:
            raise ValueError("scales must be non-empty")
        if any(b <= a for a, b in zip(self.scales, self.scales[1:])):
            raise ValueError(f"scales must be strictly increasing: {self.scales}")
        for name, value in (
            ("score_threshold", self.score_threshold),
            ("nms_iou", self.nms_iou),
        ):
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name} must be in (0, 1), got {value}")


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union, continuous-coordinate convention."""
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def nms(dets: list[Detection], iou_threshold: float) -> list[Detection]:
    """Greedy NMS: keep the best detection, drop overlaps above threshold.

    Ordering is score desc, then smaller box area, then input order; a kept
    detection suppresses others only at IoU strictly greater than the
    threshold. Output keeps that order.
    """
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError(f"iou_threshold must be in (0, 1), got {iou_threshold}")
    if not dets:
        return []
    boxes = np.array([d.box.as_list() for d in dets], dtype=np.float64)
    scores = np.array([d.score for d in dets], dtype=np.float64)
    areas = (boxes[:, 2] - boxes[:, 0]) * (boxes[:, 3] - boxes[:, 1])
    # lexsort uses the last key as primary: score desc, area asc, input order.
    order = np.lexsort((np.arange(len(dets)), areas, -scores))

    kept: list[Detection] = []
    while order.size:
        i = order[0]
        kept.append(dets[i])
        rest = order[1:]
        iw = np.minimum(boxes[i, 2], boxes[rest, 2]) - np.maximum(
            boxes[i, 0], boxes[rest, 0]
        )
        ih = np.minimum(boxes[i, 3], boxes[rest, 3]) - np.maximum(
            boxes[i, 1], boxes[rest, 1]
        )
        inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
        overlap = inter / (areas[i] + areas[rest] - inter)
        order = rest[overlap <= iou_threshold]
    return kept


def detect_multiscale(
    frame, backend: DetectorBackend, config: DetectionConfig
) -> list[Detection]:
    """Run the backend once per scale, pool, threshold, and NMS the results.

    NMS runs over the pooled set so one face seen at several scales
    collapses to a single detection (the highest-scored one, landmarks
    untouched).
    """
    pooled: list[Detection] = []
    for scale in config.scales:
        try:
            pooled.extend(backend.detect_raw(frame, scale))
        except Exception as exc:
            raise DetectionError(scale, str(exc)) from exc
    surviving = [d for d in pooled if d.score >= config.score_threshold]
    return nms(surviving, config.nms_iou)


@dataclass
class ScriptedBackend:
    """Reference backend: detections read from a fixture keyed by frame and scale.

    Fixture JSON: {frame_id: {scale: [{box: [x0,y0,x1,y1],
    landmarks: [[x,y] x5], score: s}, ...]}}. Frames or scales absent from
    the fixture yield no detections.
    """

    fixture: dict
    thread_safe: bool = True

    @classmethod
    def from_file(cls, path: Path | str) -> "ScriptedBackend":
        return cls(fixture=json.loads(Path(path).read_text(encoding="utf-8")))

    def detect_raw(self, frame, target_scale: int) -> list[Detection]:
        per_scale = self.fixture.get(frame.frame_id, {})
        entries = per_scale.get(str(target_scale), [])
        return [
            Detection(
                box=BoundingBox(*entry["box"]),
                landmarks=Landmarks5.from_array(entry["landmarks"]),
                score=float(entry["score"]),
                scale_origin=target_scale,
            )
            for entry in entries
        ]


@dataclass
class OnnxBackend:
    """Optional adapter for detectors exported to ONNX.

    The model must emit final, decoded outputs named `boxes` (Nx4),
    `scores` (N), and `landmarks` (Nx5x2) for an input image resized so its
    long side is the target scale; this adapter only rescales coordinates
    back to the original frame. Anchor decoding belongs inside the model.
    """

    model_path: Path
    thread_safe: bool = False
    _session: object = field(default=None, repr=False)

    def _ensure_session(self):
        if self._session is None:
            try:
                import onnxruntime  # type: ignore
            except ImportError as exc:
                raise RuntimeError(
                    "onnxruntime is not installed; the ONNX backend is optional"
                ) from exc
            self._session = onnxruntime.InferenceSession(str(self.model_path))
        return self._session

    def detect_raw(self, frame, target_scale: int) -> list[Detection]:
        from PIL import Image

        session = self._ensure_session()
        pixels = frame.pixels
        h, w = pixels.shape[:2]
        ratio = target_scale / max(h, w)
        new_size = (max(1, round(w * ratio)), max(1, round(h * ratio)))
        resized = np.asarray(
            Image.fromarray(pixels).resize(new_size, Image.BILINEAR), dtype=np.float32
        )
        outputs = session.run(
            ["boxes", "scores", "landmarks"],
            {session.get_inputs()[0].name: resized[None]},
        )
        boxes, scores, landmarks = outputs
        detections = []
        for box, score, lmk in zip(boxes, scores, landmarks):
            detections.append(
                Detection(
                    box=BoundingBox(*(float(v) / ratio for v in box)),
                    landmarks=Landmarks5.from_array(np.asarray(lmk) / ratio),
                    score=float(score),
                    scale_origin=target_scale,
                )
            )
        return detections
