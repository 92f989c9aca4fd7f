"""Image ingestion for the pipeline: still-image dirs and frame sequences.

A frame-sequence directory carries a `manifest.json` listing files and
timestamps; a plain still-image directory is read in sorted name order
with the frame index as its timestamp.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

IMAGE_EXTENSIONS = (".jpg", ".jpeg", ".png", ".bmp")

MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class Frame:
    frame_id: str
    pixels: np.ndarray  # HxWx3 uint8
    timestamp: float = 0.0


def load_image(path: Path | str) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"))


def load_frames(directory: Path | str) -> list[Frame]:
    """Read a directory of frames, manifest-ordered or name-ordered."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"frame directory not found: {directory}")

    manifest_path = directory / MANIFEST_NAME
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        frames = []
        for entry in manifest["frames"]:
            path = directory / entry["file"]
            frames.append(
                Frame(
                    frame_id=Path(entry["file"]).stem,
                    pixels=load_image(path),
                    timestamp=float(entry["timestamp"]),
                )
            )
        return frames

    paths = sorted(
        p for p in directory.iterdir() if p.suffix.lower() in IMAGE_EXTENSIONS
    )
    return [
        Frame(frame_id=p.stem, pixels=load_image(p), timestamp=float(i))
        for i, p in enumerate(paths)
    ]


def write_manifest(directory: Path | str, entries: list[tuple[str, float]]) -> Path:
    """Write a frame-sequence manifest: [(file name, timestamp), ...]."""
    path = Path(directory) / MANIFEST_NAME
    path.write_text(
        json.dumps(
            {"frames": [{"file": f, "timestamp": t} for f, t in entries]}, indent=2
        ),
        encoding="utf-8",
    )
    return path
