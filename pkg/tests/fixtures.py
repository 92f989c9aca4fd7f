"""Shared worksheet fixture: ground truth, predictions, on-disk variants.

The numbers implement tests/data/worksheet.md; keep the two in sync.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from maskpipe.annotations import (
    BoundingBox,
    Dataset,
    FaceId,
    FrameAnnotation,
    GroundTruthFace,
    MaskLabel,
    Split,
    write_voc_annotation,
)
from maskpipe.evaluation import EvalReport, Prediction, report_from_json_obj

DATA_DIR = Path(__file__).parent / "data"

FRAME_SIZE = (640, 480)

# (frame, label, box) rows for the 12 ground-truth faces.
WORKSHEET_GT = [
    ("f1", "Mask", (40, 100, 60, 120)),
    ("f1", "Mask", (120, 100, 140, 120)),
    ("f1", "NoMask", (200, 100, 220, 120)),
    ("f2", "Mask", (40, 100, 60, 120)),
    ("f2", "Mask", (120, 100, 140, 120)),
    ("f3", "NoMask", (40, 100, 60, 120)),
    ("f3", "NoMask", (120, 100, 140, 120)),
    ("f4", "Mask", (40, 100, 60, 120)),
    ("f4", "Mask", (120, 100, 140, 120)),
    ("f4", "Mask", (200, 100, 220, 120)),
    ("f5", "Mask", (40, 100, 60, 120)),
    ("f5", "NoMask", (120, 100, 140, 120)),
]

# (frame, label, box, confidence) rows for the 8 scripted predictions.
WORKSHEET_PREDS = [
    ("f1", "Mask", (40, 100, 60, 120), 0.99),
    ("f4", "Mask", (44, 100, 64, 120), 0.98),
    ("f2", "Mask", (400, 300, 420, 320), 0.97),
    ("f5", "Mask", (40, 100, 60, 120), 0.96),
    ("f1", "NoMask", (200, 100, 220, 120), 0.95),
    ("f3", "NoMask", (400, 300, 420, 320), 0.94),
    ("f3", "NoMask", (40, 100, 60, 120), 0.93),
    ("f5", "NoMask", (125, 100, 145, 120), 0.92),
]


def worksheet_dataset() -> Dataset:
    frames: dict[str, list[GroundTruthFace]] = {}
    for frame_id, label, box in WORKSHEET_GT:
        faces = frames.setdefault(frame_id, [])
        faces.append(
            GroundTruthFace(
                box=BoundingBox(*box),
                label=MaskLabel(label),
                id=FaceId(frame_id, len(faces)),
            )
        )
    return Dataset(
        name="worksheet",
        split=Split.TEST,
        frames=tuple(
            FrameAnnotation(fid, FRAME_SIZE[0], FRAME_SIZE[1], tuple(faces))
            for fid, faces in frames.items()
        ),
    )


def worksheet_predictions() -> list[Prediction]:
    return [
        Prediction(frame_id, BoundingBox(*box), MaskLabel(label), conf)
        for frame_id, label, box, conf in WORKSHEET_PREDS
    ]


def worksheet_expected_report() -> EvalReport:
    obj = json.loads((DATA_DIR / "worksheet_report.json").read_text())
    return report_from_json_obj(obj)


def _landmarks_in_box(box) -> list[list[float]]:
    x0, y0, x1, y1 = box
    w = x1 - x0
    h = y1 - y0
    # Rough facial geometry scaled into the box; non-degenerate by design.
    rel = [(0.3, 0.35), (0.7, 0.35), (0.5, 0.55), (0.35, 0.8), (0.65, 0.8)]
    return [[x0 + rx * w, y0 + ry * h] for rx, ry in rel]


def write_worksheet_images(directory: Path) -> None:
    """Five deterministic gradient PNGs named after the worksheet frames."""
    directory.mkdir(parents=True, exist_ok=True)
    w, h = FRAME_SIZE
    for k, frame_id in enumerate(["f1", "f2", "f3", "f4", "f5"]):
        xs = np.arange(w, dtype=np.uint32)
        ys = np.arange(h, dtype=np.uint32)
        r = ((xs[None, :] + 37 * k) % 256).astype(np.uint8).repeat(h, 0).reshape(h, w)
        g = ((ys[:, None] + 11 * k) % 256).astype(np.uint8).repeat(w, 1).reshape(h, w)
        b = ((xs[None, :] // 2 + ys[:, None] // 2) % 256).astype(np.uint8)
        pixels = np.stack([r, g, np.broadcast_to(b, (h, w))], axis=-1)
        Image.fromarray(pixels).save(directory / f"{frame_id}.png")


def write_worksheet_dataset_dir(directory: Path) -> Path:
    """Worksheet ground truth as a VOC directory with images."""
    directory.mkdir(parents=True, exist_ok=True)
    write_worksheet_images(directory)
    for frame in worksheet_dataset().frames:
        (directory / f"{frame.frame_id}.xml").write_text(
            write_voc_annotation(frame), encoding="utf-8"
        )
    return directory


def write_scripted_fixtures(directory: Path) -> tuple[Path, Path]:
    """Detector and classifier fixtures that reproduce the worksheet rows.

    The detector emits every prediction box at scale 320 with the target
    confidence as its score; the classifier scores Mask rows 1.0 and
    No-mask rows 0.0, so score x p_mask (or score x (1 - p_mask)) equals
    the detector score exactly.
    """
    directory.mkdir(parents=True, exist_ok=True)
    detector: dict[str, dict[str, list[dict]]] = {}
    classifier: dict[str, dict[str, float]] = {}

    by_frame: dict[str, list[tuple[str, tuple, float]]] = {}
    for frame_id, label, box, conf in WORKSHEET_PREDS:
        by_frame.setdefault(frame_id, []).append((label, box, conf))

    for frame_id, rows in by_frame.items():
        # Post-NMS detection order is score descending; the rows are already
        # unique, non-overlapping boxes, so index == rank within the frame.
        rows = sorted(rows, key=lambda r: -r[2])
        detector[frame_id] = {
            "320": [
                {
                    "box": list(box),
                    "landmarks": _landmarks_in_box(box),
                    "score": conf,
                }
                for _, box, conf in rows
            ]
        }
        classifier[frame_id] = {
            str(i): (1.0 if label == "Mask" else 0.0)
            for i, (label, _, _) in enumerate(rows)
        }

    detector_path = directory / "scripted_detector.json"
    classifier_path = directory / "scripted_classifier.json"
    detector_path.write_text(json.dumps(detector, indent=2))
    classifier_path.write_text(json.dumps(classifier, indent=2))
    return detector_path, classifier_path


def write_pipeline_config(
    directory: Path,
    detector_path: Path,
    classifier_path: Path,
    *,
    seed: int = 0,
    upper_half: str = "off",
) -> Path:
    config = {
        "detection": {"scales": [320, 640, 960], "score_threshold": 0.8, "nms_iou": 0.5},
        "classifier": {"decision_threshold": 0.95, "input_size": [224, 224]},
        "alignment_mode": "five_point",
        "upper_half": upper_half,
        "chip_size": [224, 224],
        "seed": seed,
        "confidence_mode": "composite",
        "detector_backend": {"type": "scripted", "fixture": str(detector_path)},
        "classifier_backend": {"type": "scripted", "fixture": str(classifier_path)},
    }
    path = directory / "pipeline_config.json"
    path.write_text(json.dumps(config, indent=2))
    return path
