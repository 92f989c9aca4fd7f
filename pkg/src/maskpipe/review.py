"""Relabel review workflow: durable decision log over a loaded dataset.

Decisions append to a JSON-lines log (fsync per record), so replaying the
log after a crash reconstructs the exact review state. The latest record
per face wins; identical retries are absorbed without a second append.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .annotations import (
    BoundingBox,
    Dataset,
    FaceId,
    GroundTruthFace,
    MaskLabel,
    RelabelAction,
    RelabelDiff,
    RelabelEntry,
)


class ReviewAction(Enum):
    SET_MASK = "SetMask"
    SET_NO_MASK = "SetNoMask"
    REMOVE = "Remove"
    KEEP = "Keep"


class UnknownFaceError(KeyError):
    pass


@dataclass(frozen=True)
class DecisionRecord:
    face_id: FaceId
    action: ReviewAction
    reviewer: str
    timestamp: float

    def to_json_obj(self) -> dict:
        return {
            "face_id": str(self.face_id),
            "action": self.action.value,
            "reviewer": self.reviewer,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "DecisionRecord":
        return cls(
            face_id=FaceId.parse(obj["face_id"]),
            action=ReviewAction(obj["action"]),
            reviewer=obj["reviewer"],
            timestamp=float(obj["timestamp"]),
        )


@dataclass(frozen=True)
class ReviewItem:
    face_id: FaceId
    frame_id: str
    box: BoundingBox
    context_box: BoundingBox
    current_label: MaskLabel
    image_url: str
    status: str  # "pending" | "decided"


class ReviewStore:
    """Review state for one dataset: queue, decisions, diff export.

    Writes are serialized through one appender lock held by the caller
    (HTTP layer); reads are safe at any time. Conflicting decisions resolve
    last-writer-wins by (timestamp, log position).
    """

    def __init__(
        self,
        dataset: Dataset,
        log_path: Path | str,
        images: dict[str, Path] | None = None,
        context_margin: float = 0.4,
    ):
        self.dataset = dataset
        self.log_path = Path(log_path)
        self.images = images or {}
        self.context_margin = context_margin

        self._faces: dict[FaceId, GroundTruthFace] = {}
        self._frame_sizes: dict[str, tuple[int, int]] = {}
        self._order: list[FaceId] = []
        for frame in dataset.frames:
            self._frame_sizes[frame.frame_id] = (frame.image_width, frame.image_height)
            for face in frame.faces:
                self._faces[face.id] = face
                self._order.append(face.id)
        self._order.sort()

        # face -> (record, log position); replayed from disk on startup.
        self._latest: dict[FaceId, tuple[DecisionRecord, int]] = {}
        self._log_length = 0
        if self.log_path.exists():
            for line in self.log_path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    self._absorb(DecisionRecord.from_json_obj(json.loads(line)))

    def _absorb(self, record: DecisionRecord) -> None:
        position = self._log_length
        self._log_length += 1
        current = self._latest.get(record.face_id)
        if current is None or (record.timestamp, position) >= (
            current[0].timestamp,
            current[1],
        ):
            self._latest[record.face_id] = (record, position)

    def _item(self, face_id: FaceId) -> ReviewItem:
        face = self._faces[face_id]
        width, height = self._frame_sizes[face_id.frame_id]
        dx = (face.box.x_max - face.box.x_min) * self.context_margin
        dy = (face.box.y_max - face.box.y_min) * self.context_margin
        context = BoundingBox(
            max(0.0, face.box.x_min - dx),
            max(0.0, face.box.y_min - dy),
            min(float(width), face.box.x_max + dx),
            min(float(height), face.box.y_max + dy),
        )
        latest = self._latest.get(face_id)
        label = face.label
        if latest is not None:
            if latest[0].action is ReviewAction.SET_MASK:
                label = MaskLabel.MASK
            elif latest[0].action is ReviewAction.SET_NO_MASK:
                label = MaskLabel.NO_MASK
        return ReviewItem(
            face_id=face_id,
            frame_id=face_id.frame_id,
            box=face.box,
            context_box=context,
            current_label=label,
            image_url=f"/media/{face_id.frame_id}",
            status="decided" if latest else "pending",
        )

    def get_item(self, face_id: FaceId) -> ReviewItem:
        if face_id not in self._faces:
            raise UnknownFaceError(str(face_id))
        return self._item(face_id)

    def next_items(self, count: int) -> list[ReviewItem]:
        """Up to `count` pending items in (frame_id, face index) order.

        No hidden cursor: the same items come back until decided.
        """
        out = []
        for face_id in self._order:
            if face_id not in self._latest:
                out.append(self._item(face_id))
                if len(out) >= count:
                    break
        return out

    def items(self, status: str | None = None, count: int | None = None) -> list[ReviewItem]:
        out = []
        for face_id in self._order:
            item = self._item(face_id)
            if status and item.status != status:
                continue
            out.append(item)
            if count is not None and len(out) >= count:
                break
        return out

    def record_decision(
        self,
        face_id: FaceId,
        action: ReviewAction,
        reviewer: str,
        timestamp: float | None = None,
    ) -> tuple[DecisionRecord, bool]:
        """Append a decision; returns (record, was_duplicate).

        Retrying an identical (face, action, reviewer) while it is already
        the latest decision is absorbed without a new log entry.
        """
        if face_id not in self._faces:
            raise UnknownFaceError(str(face_id))
        latest = self._latest.get(face_id)
        if (
            latest is not None
            and latest[0].action is action
            and latest[0].reviewer == reviewer
        ):
            return latest[0], True

        record = DecisionRecord(
            face_id=face_id,
            action=action,
            reviewer=reviewer,
            timestamp=time.time() if timestamp is None else timestamp,
        )
        with open(self.log_path, "a", encoding="utf-8", newline="\n") as f:
            f.write(json.dumps(record.to_json_obj()) + "\n")
            f.flush()
            os.fsync(f.fileno())
        self._absorb(record)
        return record, False

    def progress(self) -> dict[str, int]:
        decided = sum(1 for fid in self._order if fid in self._latest)
        total = len(self._order)
        return {"pending": total - decided, "decided": decided, "total": total}

    def export_diff(self) -> RelabelDiff:
        """Latest non-Keep decisions as a relabel diff, deterministic order.

        A Set decision matching the face's original label changes nothing
        and exports as no entry (it is equivalent to Keep).
        """
        entries = []
        for face_id in self._order:
            latest = self._latest.get(face_id)
            if latest is None or latest[0].action is ReviewAction.KEEP:
                continue
            action = latest[0].action
            original = self._faces[face_id].label
            if action is ReviewAction.SET_MASK:
                if original is MaskLabel.MASK:
                    continue
                entries.append(RelabelEntry(face_id, RelabelAction.SET_MASK))
            elif action is ReviewAction.SET_NO_MASK:
                if original is MaskLabel.NO_MASK:
                    continue
                entries.append(RelabelEntry(face_id, RelabelAction.SET_NO_MASK))
            else:
                entries.append(RelabelEntry(face_id, RelabelAction.REMOVE))
        return RelabelDiff(tuple(entries))
