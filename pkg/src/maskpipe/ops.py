"""Operations shared by the FastAPI service and the CLI.

Each op takes filesystem inputs, runs the core package, and returns plain
result objects; the service and CLI only marshal them.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from .annotations import (
    DatasetLoadResult,
    DatasetStats,
    RelabelDiff,
    apply_relabel_diff,
    dataset_stats,
    diff_datasets,
    format_relabel_diff,
    load_dataset,
    load_relabel_diff,
    write_voc_annotation,
)
from .evaluation import (
    EvalReport,
    Prediction,
    evaluate,
    read_predictions_jsonl,
    write_predictions_jsonl,
)
from .frames import load_frames
from .pipeline import (
    FrameResult,
    MaskRatePoint,
    aggregate_mask_rate,
    build_classifier,
    build_detector,
    load_pipeline_config,
    process_frames,
    results_to_predictions,
)

logger = logging.getLogger(__name__)


@dataclass
class DetectOutcome:
    predictions: list[Prediction]
    results: list[FrameResult]
    n_frames: int


def op_detect(
    input_dir: Path | str,
    config_path: Path | str | None = None,
    workers: int = 1,
    out_path: Path | str | None = None,
) -> DetectOutcome:
    cfg = load_pipeline_config(config_path)
    detector = build_detector(cfg)
    classifier = build_classifier(cfg)
    frames = load_frames(input_dir)
    results = process_frames(frames, detector, classifier, cfg, workers=workers)
    predictions = results_to_predictions(results)
    if out_path is not None:
        write_predictions_jsonl(predictions, out_path)
    return DetectOutcome(predictions=predictions, results=results, n_frames=len(frames))


def load_dataset_with_optional_relabel(
    dataset_dir: Path | str,
    fmt: str,
    relabel_path: Path | str | None = None,
) -> DatasetLoadResult:
    result = load_dataset(dataset_dir, fmt)
    if relabel_path is not None:
        diff = load_relabel_diff(relabel_path)
        result.dataset = apply_relabel_diff(result.dataset, diff)
    return result


def op_evaluate(
    dataset_dir: Path | str,
    fmt: str,
    predictions_path: Path | str,
    relabel_path: Path | str | None = None,
    iou_threshold: float = 0.5,
) -> tuple[EvalReport, DatasetLoadResult]:
    loaded = load_dataset_with_optional_relabel(dataset_dir, fmt, relabel_path)
    preds = read_predictions_jsonl(predictions_path)
    return evaluate(loaded.dataset, preds, iou_threshold), loaded


def op_stats(dataset_dir: Path | str, fmt: str) -> tuple[DatasetStats, DatasetLoadResult]:
    loaded = load_dataset(dataset_dir, fmt)
    return dataset_stats(loaded.dataset), loaded


@dataclass
class RelabelApplySummary:
    n_set_mask: int
    n_set_no_mask: int
    n_removed: int
    out_dir: str


def op_relabel_apply(
    dataset_dir: Path | str,
    fmt: str,
    diff_path: Path | str,
    out_dir: Path | str,
) -> RelabelApplySummary:
    """Apply a diff and write the relabeled annotations as VOC XML."""
    loaded = load_dataset(dataset_dir, fmt)
    diff = load_relabel_diff(diff_path)
    relabeled = apply_relabel_diff(loaded.dataset, diff)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for frame in relabeled.frames:
        (out / f"{frame.frame_id}.xml").write_text(
            write_voc_annotation(frame), encoding="utf-8"
        )
    actions = [e.action.value for e in diff.entries]
    return RelabelApplySummary(
        n_set_mask=actions.count("SetMask"),
        n_set_no_mask=actions.count("SetNoMask"),
        n_removed=actions.count("Remove"),
        out_dir=str(out),
    )


def op_relabel_diff(
    dir_a: Path | str,
    dir_b: Path | str,
    fmt: str,
    out_path: Path | str | None = None,
) -> RelabelDiff:
    a = load_dataset(dir_a, fmt).dataset
    b = load_dataset(dir_b, fmt).dataset
    diff = diff_datasets(a, b)
    if out_path is not None:
        Path(out_path).write_text(format_relabel_diff(diff), encoding="utf-8")
    return diff


def op_monitor(
    frames_dir: Path | str,
    window_seconds: float,
    config_path: Path | str | None = None,
    workers: int = 1,
) -> list[MaskRatePoint]:
    outcome = op_detect(frames_dir, config_path, workers=workers)
    return aggregate_mask_rate(outcome.results, window_seconds)
