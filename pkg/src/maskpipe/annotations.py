"""Ground-truth annotations: VOC parsing, dataset loading, stats, relabel diffs.

Face identity is (frame_id, zero-based index in annotation document order)
and is stable: applying a relabel diff never reindexes surviving faces.
"""

from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable, NamedTuple

from PIL import Image

VOC_CLASS_TO_LABEL = {"face": "NoMask", "face_mask": "Mask"}

RELABEL_HEADER = "#maskpipe-relabel v1"

# Moxa-style plain-text annotations: YOLO-normalized `class cx cy w h`,
# class 0 = Mask, class 1 = NoMask.
YOLO_CLASS_TO_LABEL = {0: "Mask", 1: "NoMask"}


class AnnotationError(ValueError):
    """Base class for annotation parsing/validation failures."""


class AnnotationParseError(AnnotationError):
    """Malformed annotation document (carries line/column info when known)."""


class UnknownClassError(AnnotationError):
    """Annotation object with a class name outside the two-class scheme."""


class BoxValidationError(AnnotationError):
    """Box degenerate after clamping to image bounds."""


class RelabelError(AnnotationError):
    """Relabel diff cannot be applied or constructed."""


class MaskLabel(Enum):
    MASK = "Mask"
    NO_MASK = "NoMask"


class Split(Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


class RelabelAction(Enum):
    SET_MASK = "SetMask"
    SET_NO_MASK = "SetNoMask"
    REMOVE = "Remove"


class FaceId(NamedTuple):
    frame_id: str
    index: int

    def __str__(self) -> str:
        return f"{self.frame_id}:{self.index}"

    @classmethod
    def parse(cls, text: str) -> "FaceId":
        frame_id, _, index = text.rpartition(":")
        if not frame_id or not index.isdigit():
            raise AnnotationError(f"not a face id: {text!r}")
        return cls(frame_id, int(index))


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in pixel coordinates, origin top-left."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise BoxValidationError(
                f"degenerate box ({self.x_min}, {self.y_min}, {self.x_max}, {self.y_max})"
            )

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def clamped(self, width: float, height: float) -> "BoundingBox":
        return BoundingBox(
            max(0.0, min(self.x_min, width)),
            max(0.0, min(self.y_min, height)),
            max(0.0, min(self.x_max, width)),
            max(0.0, min(self.y_max, height)),
        )

    def as_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]


@dataclass(frozen=True)
class GroundTruthFace:
    box: BoundingBox
    label: MaskLabel
    id: FaceId


@dataclass(frozen=True)
class FrameAnnotation:
    frame_id: str
    image_width: int
    image_height: int
    faces: tuple[GroundTruthFace, ...]

    def __post_init__(self) -> None:
        if self.image_width <= 0 or self.image_height <= 0:
            raise AnnotationError(
                f"{self.frame_id}: non-positive image size "
                f"{self.image_width}x{self.image_height}"
            )


@dataclass(frozen=True)
class Dataset:
    name: str
    split: Split
    frames: tuple[FrameAnnotation, ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for frame in self.frames:
            if frame.frame_id in seen:
                raise AnnotationError(f"duplicate frame_id {frame.frame_id!r}")
            seen.add(frame.frame_id)

    def frame(self, frame_id: str) -> FrameAnnotation:
        for f in self.frames:
            if f.frame_id == frame_id:
                return f
        raise KeyError(frame_id)

    def all_faces(self) -> list[GroundTruthFace]:
        return [face for frame in self.frames for face in frame.faces]


@dataclass(frozen=True)
class DatasetStats:
    n_images: int
    n_faces: int
    n_mask: int
    n_no_mask: int
    fraction_no_mask: float

    def to_json_obj(self) -> dict:
        return {
            "n_images": self.n_images,
            "n_faces": self.n_faces,
            "n_mask": self.n_mask,
            "n_no_mask": self.n_no_mask,
            "fraction_no_mask": self.fraction_no_mask,
        }


@dataclass(frozen=True)
class RelabelEntry:
    face_id: FaceId
    action: RelabelAction


@dataclass(frozen=True)
class RelabelDiff:
    entries: tuple[RelabelEntry, ...]

    def __post_init__(self) -> None:
        seen: set[FaceId] = set()
        for entry in self.entries:
            if entry.face_id in seen:
                raise RelabelError(f"duplicate face id in diff: {entry.face_id}")
            seen.add(entry.face_id)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class DatasetLoadResult:
    """Dataset plus everything the loader wants to tell you about it.

    `images` maps frame_id to the image file next to its annotation;
    frames whose image is missing are still loaded (warned, not dropped).
    """

    dataset: Dataset
    images: dict[str, Path] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)


def parse_voc_annotation(xml_text: str, frame_id: str) -> FrameAnnotation:
    """Parse one PASCAL-VOC-style XML document into a FrameAnnotation.

    Object classes must be `face` (NoMask) or `face_mask` (Mask). Boxes are
    clamped to the image bounds; a box that collapses under clamping is an
    error naming the face index.
    """
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        line, col = exc.position
        raise AnnotationParseError(
            f"{frame_id}: malformed XML at line {line}, column {col}: {exc.msg}"
        ) from exc

    size = root.find("size")
    if size is None:
        raise AnnotationParseError(f"{frame_id}: missing <size> element")
    try:
        width = int(float(size.findtext("width", "")))
        height = int(float(size.findtext("height", "")))
    except ValueError as exc:
        raise AnnotationParseError(f"{frame_id}: unreadable <size>: {exc}") from exc

    faces: list[GroundTruthFace] = []
    for index, obj in enumerate(root.findall("object")):
        name = (obj.findtext("name") or "").strip()
        if name not in VOC_CLASS_TO_LABEL:
            raise UnknownClassError(f"{frame_id}: unknown object class {name!r}")
        bnd = obj.find("bndbox")
        if bnd is None:
            raise AnnotationParseError(f"{frame_id}: object {index} missing <bndbox>")
        try:
            coords = [float(bnd.findtext(k, "")) for k in ("xmin", "ymin", "xmax", "ymax")]
        except ValueError as exc:
            raise AnnotationParseError(
                f"{frame_id}: object {index} has unreadable <bndbox>: {exc}"
            ) from exc
        try:
            box = BoundingBox(*coords).clamped(width, height)
        except BoxValidationError as exc:
            raise BoxValidationError(f"{frame_id}: face {index}: {exc}") from exc
        faces.append(
            GroundTruthFace(
                box=box,
                label=MaskLabel(VOC_CLASS_TO_LABEL[name]),
                id=FaceId(frame_id, index),
            )
        )
    return FrameAnnotation(frame_id, width, height, tuple(faces))


def parse_yolo_annotation(
    text: str, frame_id: str, image_width: int, image_height: int
) -> FrameAnnotation:
    """Parse plain-text YOLO-normalized `class cx cy w h` lines."""
    faces: list[GroundTruthFace] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 5:
            raise AnnotationParseError(
                f"{frame_id}: line {lineno}: expected 5 fields, got {len(parts)}"
            )
        try:
            cls = int(parts[0])
            cx, cy, w, h = (float(p) for p in parts[1:])
        except ValueError as exc:
            raise AnnotationParseError(f"{frame_id}: line {lineno}: {exc}") from exc
        if cls not in YOLO_CLASS_TO_LABEL:
            raise UnknownClassError(f"{frame_id}: unknown class index {cls}")
        index = len(faces)
        try:
            box = BoundingBox(
                (cx - w / 2) * image_width,
                (cy - h / 2) * image_height,
                (cx + w / 2) * image_width,
                (cy + h / 2) * image_height,
            ).clamped(image_width, image_height)
        except BoxValidationError as exc:
            raise BoxValidationError(f"{frame_id}: face {index}: {exc}") from exc
        faces.append(
            GroundTruthFace(
                box=box,
                label=MaskLabel(YOLO_CLASS_TO_LABEL[cls]),
                id=FaceId(frame_id, index),
            )
        )
    return FrameAnnotation(frame_id, image_width, image_height, tuple(faces))


IMAGE_EXTENSIONS = (".jpg", ".jpeg", ".png", ".bmp")


def _find_image(annotation_path: Path) -> Path | None:
    for ext in IMAGE_EXTENSIONS:
        candidate = annotation_path.with_suffix(ext)
        if candidate.exists():
            return candidate
    return None


def _read_image_size(path: Path) -> tuple[int, int]:
    # Header-only read: dimensions are all the annotation layer needs.
    with Image.open(path) as img:
        return img.size


def load_dataset(
    root_path: Path | str,
    fmt: str = "aizoo",
    *,
    name: str | None = None,
    split: Split = Split.TEST,
) -> DatasetLoadResult:
    """Load an annotated image directory into a Dataset.

    `aizoo` expects VOC XML sidecars next to images; `moxa3k` additionally
    accepts plain-text YOLO-normalized sidecars (auto-detected by extension,
    image dimensions read from the image header). Unreadable annotations are
    aggregated as per-file errors (ordered by path) and loading continues;
    images lacking annotations and annotations lacking images are warned.
    """
    root = Path(root_path)
    if fmt not in ("aizoo", "moxa3k"):
        raise ValueError(f"unknown dataset format {fmt!r}")
    if not root.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {root}")

    patterns = ["*.xml"] if fmt == "aizoo" else ["*.xml", "*.txt"]
    annotation_paths = sorted(p for pattern in patterns for p in root.rglob(pattern))

    frames: list[FrameAnnotation] = []
    images: dict[str, Path] = {}
    warnings: list[str] = []
    errors: list[str] = []
    annotated_stems: set[Path] = set()
    seen_frame_ids: set[str] = set()

    for path in annotation_paths:
        frame_id = path.stem
        if frame_id in seen_frame_ids:
            errors.append(f"{path}: duplicate annotation for frame {frame_id!r}")
            continue
        annotated_stems.add(path.with_suffix(""))
        image_path = _find_image(path)
        try:
            if path.suffix == ".xml":
                frame = parse_voc_annotation(path.read_text(encoding="utf-8"), frame_id)
            else:
                if image_path is None:
                    raise AnnotationParseError(
                        f"{frame_id}: plain-text annotation needs its image for dimensions"
                    )
                width, height = _read_image_size(image_path)
                frame = parse_yolo_annotation(
                    path.read_text(encoding="utf-8"), frame_id, width, height
                )
        except (AnnotationError, OSError) as exc:
            errors.append(f"{path}: {exc}")
            continue
        frames.append(frame)
        seen_frame_ids.add(frame_id)
        if image_path is None:
            warnings.append(f"{path}: no image found for annotation")
        else:
            images[frame_id] = image_path

    for image_path in sorted(
        p for p in root.rglob("*") if p.suffix.lower() in IMAGE_EXTENSIONS
    ):
        if image_path.with_suffix("") not in annotated_stems:
            warnings.append(f"{image_path}: image without annotation")

    if not frames:
        warnings.append(f"{root}: no annotated frames found")

    dataset = Dataset(name=name or root.name, split=split, frames=tuple(frames))
    return DatasetLoadResult(dataset, images=images, warnings=warnings, errors=errors)


def dataset_stats(dataset: Dataset) -> DatasetStats:
    n_faces = n_mask = 0
    for frame in dataset.frames:
        for face in frame.faces:
            n_faces += 1
            n_mask += face.label is MaskLabel.MASK
    n_no_mask = n_faces - n_mask
    return DatasetStats(
        n_images=len(dataset.frames),
        n_faces=n_faces,
        n_mask=n_mask,
        n_no_mask=n_no_mask,
        fraction_no_mask=n_no_mask / n_faces if n_faces else 0.0,
    )


def apply_relabel_diff(dataset: Dataset, diff: RelabelDiff) -> Dataset:
    """Return a new Dataset with the diff applied; all-or-nothing.

    Set* entries flip the label (applying Set to a face already in that
    state violates the diff invariant and is rejected); Remove deletes the
    face. Surviving faces keep their original ids, so a frame's indices may
    become sparse. A frame losing its only face is kept with an empty list.
    """
    by_id: dict[FaceId, RelabelAction] = {e.face_id: e.action for e in diff.entries}
    known = {face.id for face in dataset.all_faces()}
    unknown = sorted(fid for fid in by_id if fid not in known)
    if unknown:
        raise RelabelError(
            "unknown face ids in diff: " + ", ".join(str(f) for f in unknown)
        )

    noop: list[FaceId] = []
    new_frames: list[FrameAnnotation] = []
    for frame in dataset.frames:
        new_faces: list[GroundTruthFace] = []
        for face in frame.faces:
            action = by_id.get(face.id)
            if action is None:
                new_faces.append(face)
            elif action is RelabelAction.REMOVE:
                continue
            else:
                target = (
                    MaskLabel.MASK
                    if action is RelabelAction.SET_MASK
                    else MaskLabel.NO_MASK
                )
                if face.label is target:
                    noop.append(face.id)
                new_faces.append(replace(face, label=target))
        new_frames.append(replace(frame, faces=tuple(new_faces)))

    if noop:
        raise RelabelError(
            "diff entries that do not change state: "
            + ", ".join(str(f) for f in noop)
        )
    return replace(dataset, frames=tuple(new_frames))


def diff_datasets(a: Dataset, b: Dataset) -> RelabelDiff:
    """Minimal diff such that apply_relabel_diff(a, diff) == b.

    Requires identical frame_id sets and b's faces a subset of a's by id.
    """
    frames_a = {f.frame_id: f for f in a.frames}
    frames_b = {f.frame_id: f for f in b.frames}
    if set(frames_a) != set(frames_b):
        missing = set(frames_a) ^ set(frames_b)
        raise RelabelError(f"frame sets differ: {sorted(missing)}")

    entries: list[RelabelEntry] = []
    for frame_a in a.frames:
        frame_b = frames_b[frame_a.frame_id]
        faces_a = {face.id: face for face in frame_a.faces}
        faces_b = {face.id: face for face in frame_b.faces}
        extra = sorted(fid for fid in faces_b if fid not in faces_a)
        if extra:
            raise RelabelError(
                f"{frame_a.frame_id}: faces present in b but not a: "
                + ", ".join(str(f) for f in extra)
            )
        for face in frame_a.faces:
            other = faces_b.get(face.id)
            if other is None:
                entries.append(RelabelEntry(face.id, RelabelAction.REMOVE))
            elif other.label is not face.label:
                action = (
                    RelabelAction.SET_MASK
                    if other.label is MaskLabel.MASK
                    else RelabelAction.SET_NO_MASK
                )
                entries.append(RelabelEntry(face.id, action))
    return RelabelDiff(tuple(entries))


def format_relabel_diff(diff: RelabelDiff) -> str:
    """Serialize to the line format: header, then frame_id<TAB>index<TAB>action."""
    lines = [RELABEL_HEADER]
    lines.extend(
        f"{e.face_id.frame_id}\t{e.face_id.index}\t{e.action.value}"
        for e in diff.entries
    )
    return "\n".join(lines) + "\n"


def parse_relabel_diff(text: str) -> RelabelDiff:
    lines = text.splitlines()
    if not lines or lines[0].strip() != RELABEL_HEADER:
        raise RelabelError(f"missing diff header {RELABEL_HEADER!r}")
    entries: list[RelabelEntry] = []
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise RelabelError(f"line {lineno}: expected 3 tab-separated fields")
        frame_id, index, action = parts
        if not index.isdigit():
            raise RelabelError(f"line {lineno}: bad face index {index!r}")
        try:
            entries.append(
                RelabelEntry(FaceId(frame_id, int(index)), RelabelAction(action))
            )
        except ValueError as exc:
            raise RelabelError(f"line {lineno}: {exc}") from exc
    return RelabelDiff(tuple(entries))


def relabel_diff_to_json_obj(diff: RelabelDiff) -> dict:
    return {
        "format": "maskpipe-relabel",
        "version": 1,
        "entries": [
            {
                "frame_id": e.face_id.frame_id,
                "face_index": e.face_id.index,
                "action": e.action.value,
            }
            for e in diff.entries
        ],
    }


def relabel_diff_from_json_obj(obj: dict) -> RelabelDiff:
    if obj.get("format") != "maskpipe-relabel" or obj.get("version") != 1:
        raise RelabelError("not a maskpipe-relabel v1 JSON document")
    return RelabelDiff(
        tuple(
            RelabelEntry(
                FaceId(e["frame_id"], int(e["face_index"])),
                RelabelAction(e["action"]),
            )
            for e in obj["entries"]
        )
    )


def load_relabel_diff(
    path: Path | str,
    converter: Callable[[str], RelabelDiff] | None = None,
) -> RelabelDiff:
    """Load a diff file (text or JSON mirror by extension).

    `converter` is the hook for foreign formats: given the raw file text it
    must produce a RelabelDiff.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if converter is not None:
        return converter(text)
    if path.suffix == ".json":
        return relabel_diff_from_json_obj(json.loads(text))
    return parse_relabel_diff(text)


def write_voc_annotation(frame: FrameAnnotation) -> str:
    """Emit a frame as PASCAL-VOC XML (inverse of parse_voc_annotation)."""
    label_to_class = {MaskLabel(v): k for k, v in VOC_CLASS_TO_LABEL.items()}
    root = ET.Element("annotation")
    ET.SubElement(root, "filename").text = frame.frame_id
    size = ET.SubElement(root, "size")
    ET.SubElement(size, "width").text = str(frame.image_width)
    ET.SubElement(size, "height").text = str(frame.image_height)
    ET.SubElement(size, "depth").text = "3"
    for face in frame.faces:
        obj = ET.SubElement(root, "object")
        ET.SubElement(obj, "name").text = label_to_class[face.label]
        bnd = ET.SubElement(obj, "bndbox")
        ET.SubElement(bnd, "xmin").text = repr(face.box.x_min)
        ET.SubElement(bnd, "ymin").text = repr(face.box.y_min)
        ET.SubElement(bnd, "xmax").text = repr(face.box.x_max)
        ET.SubElement(bnd, "ymax").text = repr(face.box.y_max)
    ET.indent(root)
    return ET.tostring(root, encoding="unicode") + "\n"
