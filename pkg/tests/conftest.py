from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from maskpipe.annotations import (
    BoundingBox,
    Dataset,
    FaceId,
    FrameAnnotation,
    GroundTruthFace,
    MaskLabel,
    Split,
)


def make_face(frame_id: str, index: int, label: MaskLabel, box=None) -> GroundTruthFace:
    if box is None:
        # Spread faces on a grid so they never overlap.
        x = 10.0 + 30.0 * (index % 8)
        y = 10.0 + 30.0 * (index // 8)
        box = BoundingBox(x, y, x + 20.0, y + 20.0)
    return GroundTruthFace(box=box, label=label, id=FaceId(frame_id, index))


def make_frame(frame_id: str, labels: list[MaskLabel], size=(640, 480)) -> FrameAnnotation:
    faces = tuple(make_face(frame_id, i, label) for i, label in enumerate(labels))
    return FrameAnnotation(frame_id, size[0], size[1], faces)


def make_dataset(frames_labels: dict[str, list[MaskLabel]], name="fixture") -> Dataset:
    frames = tuple(make_frame(fid, labels) for fid, labels in frames_labels.items())
    return Dataset(name=name, split=Split.TEST, frames=frames)


@pytest.fixture
def checkerboard():
    tile = np.array([[0, 255], [255, 0]], dtype=np.uint8)
    board = np.tile(tile, (8, 8))
    return np.stack([board, board, board], axis=-1)
