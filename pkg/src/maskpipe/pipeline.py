"""Orchestration: detect, align, classify, monitor, and export.

Frames are independent work items; the worker pool re-sequences results by
input order and all per-face randomness is seeded from (pipeline seed,
frame id, detection index), so output is identical for any worker count.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .alignment import (
    AlignmentTemplate,
    ChipProvenance,
    GeometryError,
    load_template,
    estimate_similarity,
    estimate_similarity_eyes,
    mask_upper_half,
    warp_crop,
)
from .annotations import MaskLabel
from .classification import (
    ClassifierBackend,
    ClassifierConfig,
    HeuristicBackend,
    ScriptedClassifier,
    decide_label,
)
from .detection import (
    Detection,
    DetectionConfig,
    DetectionError,
    DetectorBackend,
    OnnxBackend,
    ScriptedBackend,
    detect_multiscale,
)
from .evaluation import EvalReport, Prediction, report_to_json_obj
from .frames import Frame

logger = logging.getLogger(__name__)

CONFIG_ENV_VAR = "MASKPIPE_CONFIG"


class PipelineStageError(RuntimeError):
    """A stage (detect / align / classify) failed for a whole frame."""

    def __init__(self, stage: str, frame_id: str, message: str):
        super().__init__(f"[{stage}] frame {frame_id}: {message}")
        self.stage = stage
        self.frame_id = frame_id


class StreamOrderError(ValueError):
    """Frame stream timestamps went backwards."""


class AlignmentMode(Enum):
    FIVE_POINT = "five_point"
    EYES_ONLY = "eyes_only"


class UpperHalfMode(Enum):
    OFF = "off"
    NOISE = "noise"
    ZEROS = "zeros"


class ConfidenceMode(Enum):
    # Composite: detector score x mask-class probability. The alternative
    # ranks by detector score alone.
    COMPOSITE = "composite"
    DETECTOR = "detector"


@dataclass(frozen=True)
class PipelineConfig:
    detection: DetectionConfig = DetectionConfig()
    classifier: ClassifierConfig = ClassifierConfig()
    alignment_mode: AlignmentMode = AlignmentMode.FIVE_POINT
    upper_half: UpperHalfMode = UpperHalfMode.OFF
    chip_size: tuple[int, int] = (224, 224)
    seed: int = 0
    confidence_mode: ConfidenceMode = ConfidenceMode.COMPOSITE
    template_path: str | None = None
    detector_backend: dict = field(default_factory=dict)
    classifier_backend: dict = field(default_factory=dict)

    def template(self) -> AlignmentTemplate:
        if self.template_path:
            return load_template(self.template_path).scaled_to(*self.chip_size)
        return AlignmentTemplate.standard(*self.chip_size)


def pipeline_config_to_json_obj(cfg: PipelineConfig) -> dict:
    return {
        "detection": {
            "scales": list(cfg.detection.scales),
            "score_threshold": cfg.detection.score_threshold,
            "nms_iou": cfg.detection.nms_iou,
        },
        "classifier": {
            "decision_threshold": cfg.classifier.decision_threshold,
            "input_size": list(cfg.classifier.input_size),
        },
        "alignment_mode": cfg.alignment_mode.value,
        "upper_half": cfg.upper_half.value,
        "chip_size": list(cfg.chip_size),
        "seed": cfg.seed,
        "confidence_mode": cfg.confidence_mode.value,
        "template_path": cfg.template_path,
        "detector_backend": cfg.detector_backend,
        "classifier_backend": cfg.classifier_backend,
    }


def pipeline_config_from_json_obj(obj: dict) -> PipelineConfig:
    det = obj.get("detection", {})
    clf = obj.get("classifier", {})
    defaults = PipelineConfig()
    return PipelineConfig(
        detection=DetectionConfig(
            scales=tuple(det.get("scales", defaults.detection.scales)),
            score_threshold=det.get(
                "score_threshold", defaults.detection.score_threshold
            ),
            nms_iou=det.get("nms_iou", defaults.detection.nms_iou),
        ),
        classifier=ClassifierConfig(
            decision_threshold=clf.get(
                "decision_threshold", defaults.classifier.decision_threshold
            ),
            input_size=tuple(clf.get("input_size", defaults.classifier.input_size)),
        ),
        alignment_mode=AlignmentMode(
            obj.get("alignment_mode", defaults.alignment_mode.value)
        ),
        upper_half=UpperHalfMode(obj.get("upper_half", defaults.upper_half.value)),
        chip_size=tuple(obj.get("chip_size", defaults.chip_size)),
        seed=int(obj.get("seed", defaults.seed)),
        confidence_mode=ConfidenceMode(
            obj.get("confidence_mode", defaults.confidence_mode.value)
        ),
        template_path=obj.get("template_path"),
        detector_backend=obj.get("detector_backend", {}),
        classifier_backend=obj.get("classifier_backend", {}),
    )


def load_pipeline_config(path: Path | str | None = None) -> PipelineConfig:
    """Load config JSON from `path`, else $MASKPIPE_CONFIG, else defaults."""
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR) or None
    if path is None:
        return PipelineConfig()
    text = Path(path).read_text(encoding="utf-8")
    return pipeline_config_from_json_obj(json.loads(text))


def build_detector(cfg: PipelineConfig) -> DetectorBackend:
    spec = cfg.detector_backend
    kind = spec.get("type")
    if kind == "scripted":
        return ScriptedBackend.from_file(spec["fixture"])
    if kind == "onnx":
        return OnnxBackend(model_path=Path(spec["model"]))
    raise ValueError(
        f"config names no usable detector backend (got {spec!r}); "
        'expected {"type": "scripted", "fixture": ...} or {"type": "onnx", "model": ...}'
    )


def build_classifier(cfg: PipelineConfig) -> ClassifierBackend:
    spec = cfg.classifier_backend
    kind = spec.get("type", "heuristic")
    if kind == "heuristic":
        return HeuristicBackend(from_fraction=spec.get("from_fraction", 0.5))
    if kind == "scripted":
        return ScriptedClassifier.from_file(spec["fixture"])
    raise ValueError(f"unknown classifier backend {spec!r}")


@dataclass(frozen=True)
class MaskedFaceDetection:
    detection: Detection
    label: MaskLabel
    p_mask: float
    confidence: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence outside [0, 1]: {self.confidence}")


@dataclass(frozen=True)
class FrameResult:
    frame_id: str
    timestamp: float
    detections: tuple[MaskedFaceDetection, ...]


@dataclass(frozen=True)
class MaskRatePoint:
    window_start: float
    window_end: float
    n_faces: int
    n_masked: int
    rate: float | None  # None marks an empty window

    @property
    def empty(self) -> bool:
        return self.n_faces == 0


def _face_seed(base: int, frame_id: str, index: int) -> int:
    digest = hashlib.blake2s(
        f"{base}:{frame_id}:{index}".encode(), digest_size=8
    ).digest()
    return int.from_bytes(digest, "big")


def run_pipeline(
    frame: Frame,
    detector: DetectorBackend,
    classifier: ClassifierBackend,
    cfg: PipelineConfig,
) -> list[MaskedFaceDetection]:
    """Detect faces, align each, optionally occlude, classify, decide.

    A face whose landmarks are too degenerate to align is skipped with a
    warning rather than aborting the frame; backend failures raise with
    their stage tag.
    """
    template = cfg.template()
    try:
        detections = detect_multiscale(frame, detector, cfg.detection)
    except DetectionError as exc:
        raise PipelineStageError("detect", frame.frame_id, str(exc)) from exc

    results: list[MaskedFaceDetection] = []
    for index, det in enumerate(detections):
        try:
            if cfg.alignment_mode is AlignmentMode.FIVE_POINT:
                transform = estimate_similarity(det.landmarks, template)
            else:
                transform = estimate_similarity_eyes(
                    det.landmarks.left_eye, det.landmarks.right_eye, template
                )
        except GeometryError as exc:
            logger.warning(
                "frame %s: skipping detection %d, alignment degenerate: %s",
                frame.frame_id,
                index,
                exc,
            )
            continue

        chip = warp_crop(
            frame.pixels,
            transform,
            cfg.chip_size,
            provenance=ChipProvenance(frame.frame_id, index, transform),
        )
        if cfg.upper_half is not UpperHalfMode.OFF:
            nose_y = int(round(float(transform.apply(det.landmarks.nose)[0, 1])))
            nose_y = min(max(nose_y, 0), chip.height)
            chip = mask_upper_half(
                chip,
                nose_y,
                cfg.upper_half.value,
                seed=_face_seed(cfg.seed, frame.frame_id, index),
            )
        try:
            score = classifier.score(chip)
        except Exception as exc:
            raise PipelineStageError("classify", frame.frame_id, str(exc)) from exc

        label = decide_label(score, cfg.classifier)
        if cfg.confidence_mode is ConfidenceMode.COMPOSITE:
            class_prob = score.p_mask if label is MaskLabel.MASK else 1.0 - score.p_mask
            confidence = det.score * class_prob
        else:
            confidence = det.score
        results.append(
            MaskedFaceDetection(
                detection=det,
                label=label,
                p_mask=score.p_mask,
                confidence=confidence,
            )
        )
    return results


class _SerializedBackend:
    """Wrap a backend that declared itself single-threaded with a lock."""

    def __init__(self, inner):
        self._inner = inner
        self._lock = threading.Lock()
        self.thread_safe = True

    def detect_raw(self, frame, target_scale):
        with self._lock:
            return self._inner.detect_raw(frame, target_scale)

    def score(self, chip):
        with self._lock:
            return self._inner.score(chip)


def _guarded(backend):
    if getattr(backend, "thread_safe", True):
        return backend
    return _SerializedBackend(backend)


def process_frames(
    frames: list[Frame],
    detector: DetectorBackend,
    classifier: ClassifierBackend,
    cfg: PipelineConfig,
    workers: int = 1,
) -> list[FrameResult]:
    """Run the pipeline over frames with a worker pool.

    Results come back in input order regardless of worker count, so the
    observable behavior matches sequential execution.
    """
    detector = _guarded(detector)
    classifier = _guarded(classifier)

    def one(frame: Frame) -> FrameResult:
        return FrameResult(
            frame_id=frame.frame_id,
            timestamp=frame.timestamp,
            detections=tuple(run_pipeline(frame, detector, classifier, cfg)),
        )

    if workers <= 1:
        return [one(f) for f in frames]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, frames))


def results_to_predictions(results: list[FrameResult]) -> list[Prediction]:
    return [
        Prediction(
            frame_id=r.frame_id,
            box=d.detection.box,
            label=d.label,
            confidence=d.confidence,
        )
        for r in results
        for d in r.detections
    ]


def aggregate_mask_rate(
    results: list[FrameResult], window_length: float
) -> list[MaskRatePoint]:
    """Tumbling-window mask-wearing rates, windows aligned to the first frame.

    Every window from the first through the last timestamp is emitted;
    a window with no faces is marked empty rather than rated 0.
    """
    if window_length <= 0:
        raise ValueError(f"window_length must be positive, got {window_length}")
    if not results:
        return []
    for prev, curr in zip(results, results[1:]):
        if curr.timestamp < prev.timestamp:
            raise StreamOrderError(
                f"frame {curr.frame_id} at {curr.timestamp} arrived after "
                f"frame {prev.frame_id} at {prev.timestamp}"
            )

    t0 = results[0].timestamp
    n_windows = int(math.floor((results[-1].timestamp - t0) / window_length)) + 1
    faces = [0] * n_windows
    masked = [0] * n_windows
    for r in results:
        k = min(int(math.floor((r.timestamp - t0) / window_length)), n_windows - 1)
        for d in r.detections:
            faces[k] += 1
            masked[k] += d.label is MaskLabel.MASK
    return [
        MaskRatePoint(
            window_start=t0 + k * window_length,
            window_end=t0 + (k + 1) * window_length,
            n_faces=faces[k],
            n_masked=masked[k],
            rate=masked[k] / faces[k] if faces[k] else None,
        )
        for k in range(n_windows)
    ]


def rate_points_to_json_obj(points: list[MaskRatePoint]) -> list[dict]:
    return [
        {
            "window_start": p.window_start,
            "window_end": p.window_end,
            "n_faces": p.n_faces,
            "n_masked": p.n_masked,
            "rate": p.rate,
        }
        for p in points
    ]


RATE_CSV_COLUMNS = ["window_start", "window_end", "n_faces", "n_masked", "rate"]
REPORT_CSV_COLUMNS = [
    "class",
    "precision",
    "recall",
    "f1",
    "average_precision",
    "tp",
    "fp",
    "fn",
    "n_gt",
    "n_pred",
    "mAP",
]


def export_report(report, fmt: str) -> bytes:
    """Serialize an EvalReport or a list of MaskRatePoints.

    Formats: json (loss-free), csv (documented stable columns), table
    (fixed-width, human-oriented). Empty rates serialize as null / empty.
    """
    from .evaluation import format_report_table  # local to avoid cycle at import

    if fmt not in ("json", "csv", "table"):
        raise ValueError(f"unknown export format {fmt!r}")

    if isinstance(report, EvalReport):
        if fmt == "json":
            return (json.dumps(report_to_json_obj(report), indent=2) + "\n").encode()
        if fmt == "table":
            return format_report_table(report).encode()
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_CSV_COLUMNS)
        for label in MaskLabel:
            cm = report.per_class[label]
            writer.writerow(
                [
                    label.value,
                    cm.precision,
                    cm.recall,
                    cm.f1,
                    "" if cm.average_precision is None else cm.average_precision,
                    cm.tp,
                    cm.fp,
                    cm.fn,
                    cm.n_gt,
                    cm.n_pred,
                    "" if report.mean_ap is None else report.mean_ap,
                ]
            )
        return buf.getvalue().encode()

    points: list[MaskRatePoint] = list(report)
    if fmt == "json":
        return (json.dumps(rate_points_to_json_obj(points), indent=2) + "\n").encode()
    if fmt == "table":
        lines = [
            f"{'window_start':>14s}{'window_end':>14s}{'faces':>8s}{'masked':>8s}{'rate':>8s}"
        ]
        for p in points:
            rate = "-" if p.rate is None else f"{p.rate:.4f}"
            lines.append(
                f"{p.window_start:14.3f}{p.window_end:14.3f}{p.n_faces:8d}{p.n_masked:8d}{rate:>8s}"
            )
        return ("\n".join(lines) + "\n").encode()
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RATE_CSV_COLUMNS)
    for p in points:
        writer.writerow(
            [
                p.window_start,
                p.window_end,
                p.n_faces,
                p.n_masked,
                "" if p.rate is None else p.rate,
            ]
        )
    return buf.getvalue().encode()
