"""Detection scoring: class-aware matching, P/R/F1, all-point AP, mAP.

Matching is class-aware (a Mask prediction can never consume a No-mask
ground truth) and greedy in confidence order; AP uses the all-point
interpolation (running maximum of precision over the recall axis).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .annotations import BoundingBox, Dataset, FaceId, GroundTruthFace, MaskLabel
from .detection import iou

logger = logging.getLogger(__name__)

CLASS_DISPLAY = {MaskLabel.NO_MASK: "No-mask", MaskLabel.MASK: "Mask"}


class EvaluationUsageError(ValueError):
    """Inputs violate the evaluation contract (frames, ids, thresholds)."""


@dataclass(frozen=True)
class Prediction:
    frame_id: str
    box: BoundingBox
    label: MaskLabel
    confidence: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence outside [0, 1]: {self.confidence}")


@dataclass(frozen=True)
class ClassMatch:
    """One class's matches within a frame: (prediction, matched gt id or None)."""

    pairs: tuple[tuple[Prediction, FaceId | None], ...]
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class MatchResult:
    per_class: dict[MaskLabel, ClassMatch]


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    average_precision: float | None  # None marks "no ground truth of this class"
    tp: int
    fp: int
    fn: int
    n_gt: int
    n_pred: int


@dataclass(frozen=True)
class EvalReport:
    per_class: dict[MaskLabel, ClassMetrics]
    mean_ap: float | None
    iou_threshold: float
    warnings: tuple[str, ...] = ()


def _rank_key(preds: list[Prediction], gts: list[GroundTruthFace]):
    """Sort key: confidence desc, then best-gt IoU desc, then input order."""
    best_iou = []
    for p in preds:
        best = 0.0
        for g in gts:
            best = max(best, iou(p.box, g.box))
        best_iou.append(best)
    return sorted(
        range(len(preds)), key=lambda i: (-preds[i].confidence, -best_iou[i], i)
    )


def _greedy_match(
    ranked: list[Prediction], gts: list[GroundTruthFace], iou_threshold: float
) -> list[FaceId | None]:
    """Each prediction takes the unmatched gt with highest IoU, if >= threshold."""
    taken = [False] * len(gts)
    out: list[FaceId | None] = []
    for pred in ranked:
        best_iou = -1.0
        best_idx = -1
        for gi, gt in enumerate(gts):
            if taken[gi]:
                continue
            overlap = iou(pred.box, gt.box)
            if overlap > best_iou:
                best_iou = overlap
                best_idx = gi
        if best_idx >= 0 and best_iou >= iou_threshold:
            taken[best_idx] = True
            out.append(gts[best_idx].id)
        else:
            out.append(None)
    return out


def match_detections(
    preds: list[Prediction],
    gts: list[GroundTruthFace],
    iou_threshold: float = 0.5,
) -> MatchResult:
    """Match one frame's predictions against its ground truth, per class."""
    if not 0.0 < iou_threshold < 1.0:
        raise EvaluationUsageError(
            f"iou_threshold must be in (0, 1), got {iou_threshold}"
        )
    frame_ids = {p.frame_id for p in preds} | {g.id.frame_id for g in gts}
    if len(frame_ids) > 1:
        raise EvaluationUsageError(
            f"match_detections got mixed frames: {sorted(frame_ids)}"
        )

    per_class: dict[MaskLabel, ClassMatch] = {}
    for label in MaskLabel:
        class_preds = [p for p in preds if p.label is label]
        class_gts = [g for g in gts if g.label is label]
        order = _rank_key(class_preds, class_gts)
        ranked = [class_preds[i] for i in order]
        matches = _greedy_match(ranked, class_gts, iou_threshold)
        tp = sum(1 for m in matches if m is not None)
        per_class[label] = ClassMatch(
            pairs=tuple(zip(ranked, matches)),
            tp=tp,
            fp=len(ranked) - tp,
            fn=len(class_gts) - tp,
        )
    return MatchResult(per_class=per_class)


def precision_recall_f1(m: MatchResult) -> dict[MaskLabel, tuple[float, float, float]]:
    """Per-class (precision, recall, f1); degenerate denominators give 0."""
    out = {}
    for label, cm in m.per_class.items():
        out[label] = _prf(cm.tp, cm.fp, cm.fn)
    return out


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def average_precision(
    preds: list[Prediction],
    gts: list[GroundTruthFace],
    iou_threshold: float = 0.5,
) -> float | None:
    """All-point-interpolation AP for one class across frames.

    Predictions are ranked globally (confidence desc, ties by frame id then
    input order) and matched against per-frame ground-truth pools. Returns
    None when the class has no ground truth at all (the caller excludes it
    from mAP).
    """
    if not 0.0 < iou_threshold < 1.0:
        raise EvaluationUsageError(
            f"iou_threshold must be in (0, 1), got {iou_threshold}"
        )
    n_gt = len(gts)
    if n_gt == 0:
        return None
    if not preds:
        return 0.0

    pools: dict[str, list[GroundTruthFace]] = {}
    for g in gts:
        pools.setdefault(g.id.frame_id, []).append(g)
    taken = {fid: [False] * len(faces) for fid, faces in pools.items()}

    order = sorted(
        range(len(preds)),
        key=lambda i: (-preds[i].confidence, preds[i].frame_id, i),
    )
    tp_flags = np.zeros(len(order), dtype=np.float64)
    for rank, i in enumerate(order):
        pred = preds[i]
        frame_gts = pools.get(pred.frame_id, [])
        best_iou = -1.0
        best_idx = -1
        for gi, gt in enumerate(frame_gts):
            if taken[pred.frame_id][gi]:
                continue
            overlap = iou(pred.box, gt.box)
            if overlap > best_iou:
                best_iou = overlap
                best_idx = gi
        if best_idx >= 0 and best_iou >= iou_threshold:
            taken[pred.frame_id][best_idx] = True
            tp_flags[rank] = 1.0

    cum_tp = np.cumsum(tp_flags)
    ranks = np.arange(1, len(order) + 1, dtype=np.float64)
    precisions = cum_tp / ranks
    recalls = cum_tp / n_gt

    # All-point interpolation: running max of precision from the tail.
    interp = np.maximum.accumulate(precisions[::-1])[::-1]
    prev_recalls = np.concatenate(([0.0], recalls[:-1]))
    return float(((recalls - prev_recalls) * interp).sum())


def evaluate(
    gts: Dataset,
    preds: list[Prediction],
    iou_threshold: float = 0.5,
) -> EvalReport:
    """Score a prediction set against a dataset.

    P/R/F1 come from the summed per-frame match counts at the operating
    point; AP comes from the global confidence-ranked curve. mAP averages
    the class APs, skipping (with a warning) classes absent from the ground
    truth.
    """
    known_frames = {f.frame_id for f in gts.frames}
    unknown = sorted({p.frame_id for p in preds} - known_frames)
    if unknown:
        raise EvaluationUsageError(
            "predictions reference unknown frames: " + ", ".join(unknown)
        )

    preds_by_frame: dict[str, list[Prediction]] = {}
    for p in preds:
        preds_by_frame.setdefault(p.frame_id, []).append(p)

    counts = {label: [0, 0, 0] for label in MaskLabel}  # tp, fp, fn
    for frame in gts.frames:
        result = match_detections(
            preds_by_frame.get(frame.frame_id, []), list(frame.faces), iou_threshold
        )
        for label, cm in result.per_class.items():
            counts[label][0] += cm.tp
            counts[label][1] += cm.fp
            counts[label][2] += cm.fn

    warnings: list[str] = []
    per_class: dict[MaskLabel, ClassMetrics] = {}
    aps: list[float] = []
    for label in MaskLabel:
        class_preds = [p for p in preds if p.label is label]
        class_gts = [g for g in gts.all_faces() if g.label is label]
        ap = average_precision(class_preds, class_gts, iou_threshold)
        if ap is None:
            message = f"no ground truth of class {label.value}; AP undefined, excluded from mAP"
            warnings.append(message)
            logger.warning(message)
        else:
            aps.append(ap)
        tp, fp, fn = counts[label]
        precision, recall, f1 = _prf(tp, fp, fn)
        per_class[label] = ClassMetrics(
            precision=precision,
            recall=recall,
            f1=f1,
            average_precision=ap,
            tp=tp,
            fp=fp,
            fn=fn,
            n_gt=len(class_gts),
            n_pred=len(class_preds),
        )
    mean_ap = sum(aps) / len(aps) if aps else None
    return EvalReport(
        per_class=per_class,
        mean_ap=mean_ap,
        iou_threshold=iou_threshold,
        warnings=tuple(warnings),
    )


# --- serialization -----------------------------------------------------------


def prediction_to_json_obj(p: Prediction) -> dict:
    return {
        "frame_id": p.frame_id,
        "box": p.box.as_list(),
        "label": p.label.value,
        "confidence": p.confidence,
    }


def prediction_from_json_obj(obj: dict) -> Prediction:
    return Prediction(
        frame_id=obj["frame_id"],
        box=BoundingBox(*obj["box"]),
        label=MaskLabel(obj["label"]),
        confidence=float(obj["confidence"]),
    )


def write_predictions_jsonl(preds: list[Prediction], path: Path | str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for p in preds:
            f.write(json.dumps(prediction_to_json_obj(p)) + "\n")


def read_predictions_jsonl(path: Path | str) -> list[Prediction]:
    preds = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            preds.append(prediction_from_json_obj(json.loads(line)))
    return preds


def report_to_json_obj(report: EvalReport) -> dict:
    def class_obj(cm: ClassMetrics) -> dict:
        return {
            "precision": cm.precision,
            "recall": cm.recall,
            "f1": cm.f1,
            "average_precision": cm.average_precision,
            "tp": cm.tp,
            "fp": cm.fp,
            "fn": cm.fn,
            "n_gt": cm.n_gt,
            "n_pred": cm.n_pred,
        }

    return {
        "no_mask": class_obj(report.per_class[MaskLabel.NO_MASK]),
        "mask": class_obj(report.per_class[MaskLabel.MASK]),
        "mAP": report.mean_ap,
        "iou_threshold": report.iou_threshold,
        "warnings": list(report.warnings),
    }


def report_from_json_obj(obj: dict) -> EvalReport:
    def metrics(o: dict) -> ClassMetrics:
        return ClassMetrics(
            precision=o["precision"],
            recall=o["recall"],
            f1=o["f1"],
            average_precision=o["average_precision"],
            tp=o["tp"],
            fp=o["fp"],
            fn=o["fn"],
            n_gt=o["n_gt"],
            n_pred=o["n_pred"],
        )

    return EvalReport(
        per_class={
            MaskLabel.NO_MASK: metrics(obj["no_mask"]),
            MaskLabel.MASK: metrics(obj["mask"]),
        },
        mean_ap=obj["mAP"],
        iou_threshold=obj["iou_threshold"],
        warnings=tuple(obj.get("warnings", ())),
    )


def format_report_table(report: EvalReport) -> str:
    """Fixed-width table: per-class Precision / Recall / F1-score, then mAP."""

    def fmt(v: float | None) -> str:
        return "-" if v is None else f"{100 * v:.2f}"

    header_groups = f"{'':12s}{'No-mask':^33s}{'Mask':^33s}{'mAP':>11s}"
    header_cols = (
        f"{'':12s}"
        + f"{'Precision':>11s}{'Recall':>11s}{'F1-score':>11s}" * 2
        + f"{'':11s}"
    )
    nm = report.per_class[MaskLabel.NO_MASK]
    mk = report.per_class[MaskLabel.MASK]
    row = (
        f"{'maskpipe':12s}"
        f"{fmt(nm.precision):>11s}{fmt(nm.recall):>11s}{fmt(nm.f1):>11s}"
        f"{fmt(mk.precision):>11s}{fmt(mk.recall):>11s}{fmt(mk.f1):>11s}"
        f"{fmt(report.mean_ap):>11s}"
    )
    return "\n".join([header_groups, header_cols, row]) + "\n"
