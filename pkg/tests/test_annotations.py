from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_dataset
from maskpipe.annotations import (
    AnnotationParseError,
    BoundingBox,
    BoxValidationError,
    Dataset,
    DatasetStats,
    FaceId,
    FrameAnnotation,
    GroundTruthFace,
    MaskLabel,
    RelabelAction,
    RelabelDiff,
    RelabelEntry,
    RelabelError,
    UnknownClassError,
    apply_relabel_diff,
    dataset_stats,
    diff_datasets,
    format_relabel_diff,
    load_dataset,
    load_relabel_diff,
    parse_relabel_diff,
    parse_voc_annotation,
    parse_yolo_annotation,
    relabel_diff_from_json_obj,
    relabel_diff_to_json_obj,
    write_voc_annotation,
)

VOC_ONE_MASK = """
<annotation>
  <size><width>100</width><height>100</height></size>
  <object>
    <name>face_mask</name>
    <bndbox><xmin>10</xmin><ymin>10</ymin><xmax>50</xmax><ymax>50</ymax></bndbox>
  </object>
</annotation>
"""

VOC_EMPTY = """
<annotation>
  <size><width>64</width><height>48</height></size>
</annotation>
"""

VOC_OUT_OF_BOUNDS = """
<annotation>
  <size><width>100</width><height>100</height></size>
  <object>
    <name>face</name>
    <bndbox><xmin>-5</xmin><ymin>0</ymin><xmax>50</xmax><ymax>120</ymax></bndbox>
  </object>
</annotation>
"""


class TestParseVoc:
    def test_single_mask_object(self):
        frame = parse_voc_annotation(VOC_ONE_MASK, "f1")
        assert frame.frame_id == "f1"
        assert (frame.image_width, frame.image_height) == (100, 100)
        assert len(frame.faces) == 1
        face = frame.faces[0]
        assert face.label is MaskLabel.MASK
        assert face.box == BoundingBox(10, 10, 50, 50)
        assert face.id == FaceId("f1", 0)

    def test_zero_objects(self):
        frame = parse_voc_annotation(VOC_EMPTY, "f2")
        assert frame.faces == ()

    def test_box_clamped_to_image(self):
        # (-5, 0, 50, 120) in a 100x100 image clamps to (0, 0, 50, 100).
        frame = parse_voc_annotation(VOC_OUT_OF_BOUNDS, "f3")
        assert frame.faces[0].box == BoundingBox(0, 0, 50, 100)
        assert frame.faces[0].label is MaskLabel.NO_MASK

    def test_malformed_xml_reports_position(self):
        with pytest.raises(AnnotationParseError, match=r"line \d+"):
            parse_voc_annotation("<annotation><size>", "bad")

    def test_unknown_class_named_in_error(self):
        xml = VOC_ONE_MASK.replace("face_mask", "person")
        with pytest.raises(UnknownClassError, match="person"):
            parse_voc_annotation(xml, "f")

    def test_degenerate_after_clamp_names_face_index(self):
        xml = """
        <annotation>
          <size><width>100</width><height>100</height></size>
          <object><name>face</name>
            <bndbox><xmin>120</xmin><ymin>10</ymin><xmax>150</xmax><ymax>20</ymax></bndbox>
          </object>
        </annotation>
        """
        with pytest.raises(BoxValidationError, match="face 0"):
            parse_voc_annotation(xml, "f")

    def test_deterministic(self):
        assert parse_voc_annotation(VOC_ONE_MASK, "f") == parse_voc_annotation(
            VOC_ONE_MASK, "f"
        )

    def test_roundtrip_through_writer(self):
        frame = parse_voc_annotation(VOC_ONE_MASK, "f1")
        assert parse_voc_annotation(write_voc_annotation(frame), "f1") == frame


class TestParseYolo:
    def test_normalized_boxes(self):
        frame = parse_yolo_annotation("0 0.5 0.5 0.5 0.5\n", "m", 200, 100)
        face = frame.faces[0]
        assert face.label is MaskLabel.MASK
        assert face.box == BoundingBox(50.0, 25.0, 150.0, 75.0)

    def test_bad_line_rejected(self):
        with pytest.raises(AnnotationParseError, match="line 1"):
            parse_yolo_annotation("0 0.5 0.5\n", "m", 100, 100)


class TestLoadDataset:
    def _write(self, path, text):
        path.write_text(text, encoding="utf-8")

    def test_mixed_directory(self, tmp_path):
        self._write(tmp_path / "a.xml", VOC_ONE_MASK)
        self._write(tmp_path / "b.xml", VOC_EMPTY)
        self._write(tmp_path / "c.xml", "<annotation><size>")
        result = load_dataset(tmp_path, "aizoo")
        assert len(result.dataset.frames) == 2
        assert len(result.errors) == 1
        assert "c.xml" in result.errors[0]
        # No images next to annotations -> one warning each.
        assert sum("no image" in w for w in result.warnings) == 2

    def test_empty_directory(self, tmp_path):
        result = load_dataset(tmp_path, "aizoo")
        assert result.dataset.frames == ()
        assert result.warnings

    def test_image_without_annotation_warned(self, tmp_path):
        self._write(tmp_path / "a.xml", VOC_EMPTY)
        (tmp_path / "orphan.jpg").write_bytes(b"\xff\xd8stub")
        result = load_dataset(tmp_path, "aizoo")
        assert any("orphan.jpg" in w for w in result.warnings)

    def test_missing_directory(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_dataset(tmp_path / "nope", "aizoo")

    def test_moxa_mixed_sidecars_for_one_stem_aggregate_error(self, tmp_path):
        # Both an XML and a TXT for the same frame: first (by sorted path)
        # wins, the duplicate lands in errors rather than crashing the load.
        self._write(tmp_path / "a.xml", VOC_ONE_MASK)
        self._write(tmp_path / "a.txt", "0 0.5 0.5 0.2 0.2\n")
        from PIL import Image

        Image.new("RGB", (100, 100)).save(tmp_path / "a.png")
        result = load_dataset(tmp_path, "moxa3k")
        assert len(result.dataset.frames) == 1
        assert len(result.errors) == 1
        assert "duplicate annotation" in result.errors[0]

    def test_moxa_yolo_txt_loaded_with_image_dims(self, tmp_path):
        self._write(tmp_path / "m.txt", "0 0.5 0.5 0.5 0.5\n1 0.25 0.25 0.1 0.1\n")
        from PIL import Image

        Image.new("RGB", (200, 100)).save(tmp_path / "m.png")
        result = load_dataset(tmp_path, "moxa3k")
        frame = result.dataset.frames[0]
        assert (frame.image_width, frame.image_height) == (200, 100)
        assert [f.label for f in frame.faces] == [MaskLabel.MASK, MaskLabel.NO_MASK]

    def test_errors_ordered_by_path(self, tmp_path):
        self._write(tmp_path / "z.xml", "<broken")
        self._write(tmp_path / "a.xml", "<broken")
        result = load_dataset(tmp_path, "aizoo")
        assert [("a.xml" in e, "z.xml" in e) for e in result.errors] == [
            (True, False),
            (False, True),
        ]


class TestDatasetStats:
    def test_empty(self):
        stats = dataset_stats(make_dataset({}))
        assert stats == DatasetStats(0, 0, 0, 0, 0.0)

    def test_counting(self):
        ds = make_dataset(
            {
                "f1": [MaskLabel.MASK, MaskLabel.MASK],
                "f2": [MaskLabel.MASK, MaskLabel.NO_MASK],
            }
        )
        stats = dataset_stats(ds)
        assert stats.n_images == 2
        assert stats.n_faces == 4
        assert stats.n_mask == 3
        assert stats.n_no_mask == 1
        assert stats.fraction_no_mask == 0.25

    def test_invariant_under_frame_reordering(self):
        ds = make_dataset({"a": [MaskLabel.MASK], "b": [MaskLabel.NO_MASK] * 3})
        reordered = Dataset(ds.name, ds.split, tuple(reversed(ds.frames)))
        assert dataset_stats(ds) == dataset_stats(reordered)

    def test_json_field_names(self):
        obj = dataset_stats(make_dataset({})).to_json_obj()
        assert set(obj) == {
            "n_images",
            "n_faces",
            "n_mask",
            "n_no_mask",
            "fraction_no_mask",
        }


class TestRelabel:
    def test_empty_diff_is_identity(self):
        ds = make_dataset({"f": [MaskLabel.MASK]})
        assert apply_relabel_diff(ds, RelabelDiff(())) == ds

    def test_flip_and_remove(self):
        ds = make_dataset({"f": [MaskLabel.MASK, MaskLabel.NO_MASK, MaskLabel.MASK]})
        diff = RelabelDiff(
            (
                RelabelEntry(FaceId("f", 0), RelabelAction.SET_NO_MASK),
                RelabelEntry(FaceId("f", 1), RelabelAction.SET_MASK),
                RelabelEntry(FaceId("f", 2), RelabelAction.REMOVE),
            )
        )
        out = apply_relabel_diff(ds, diff)
        faces = out.frames[0].faces
        assert [f.label for f in faces] == [MaskLabel.NO_MASK, MaskLabel.MASK]
        # Surviving faces keep their original ids.
        assert [f.id.index for f in faces] == [0, 1]

    def test_removing_only_face_keeps_frame(self):
        ds = make_dataset({"f": [MaskLabel.MASK]})
        diff = RelabelDiff((RelabelEntry(FaceId("f", 0), RelabelAction.REMOVE),))
        out = apply_relabel_diff(ds, diff)
        assert len(out.frames) == 1
        assert out.frames[0].faces == ()

    def test_unknown_ids_all_listed_no_partial_application(self):
        ds = make_dataset({"f": [MaskLabel.MASK]})
        diff = RelabelDiff(
            (
                RelabelEntry(FaceId("f", 5), RelabelAction.REMOVE),
                RelabelEntry(FaceId("g", 0), RelabelAction.SET_MASK),
            )
        )
        with pytest.raises(RelabelError) as exc:
            apply_relabel_diff(ds, diff)
        assert "f:5" in str(exc.value) and "g:0" in str(exc.value)

    def test_noop_action_rejected(self):
        ds = make_dataset({"f": [MaskLabel.MASK]})
        diff = RelabelDiff((RelabelEntry(FaceId("f", 0), RelabelAction.SET_MASK),))
        with pytest.raises(RelabelError, match="do not change state"):
            apply_relabel_diff(ds, diff)

    def test_n_images_invariant_and_face_count_drop(self):
        ds = make_dataset({"f": [MaskLabel.MASK] * 4, "g": [MaskLabel.NO_MASK]})
        diff = RelabelDiff(
            (
                RelabelEntry(FaceId("f", 1), RelabelAction.REMOVE),
                RelabelEntry(FaceId("f", 2), RelabelAction.REMOVE),
            )
        )
        out = apply_relabel_diff(ds, diff)
        before, after = dataset_stats(ds), dataset_stats(out)
        assert after.n_images == before.n_images
        assert after.n_faces == before.n_faces - 2

    def test_diff_identity(self):
        ds = make_dataset({"f": [MaskLabel.MASK]})
        assert diff_datasets(ds, ds).entries == ()

    def test_diff_single_flip(self):
        a = make_dataset({"f": [MaskLabel.MASK, MaskLabel.NO_MASK]})
        b = apply_relabel_diff(
            a, RelabelDiff((RelabelEntry(FaceId("f", 0), RelabelAction.SET_NO_MASK),))
        )
        diff = diff_datasets(a, b)
        assert diff.entries == (
            RelabelEntry(FaceId("f", 0), RelabelAction.SET_NO_MASK),
        )

    def test_face_only_in_b_is_structural_error(self):
        a = make_dataset({"f": [MaskLabel.MASK]})
        b = make_dataset({"f": [MaskLabel.MASK, MaskLabel.MASK]})
        with pytest.raises(RelabelError, match="present in b"):
            diff_datasets(a, b)


@st.composite
def dataset_pairs(draw):
    """A random dataset and a mutation of it (flips and removals)."""
    n_frames = draw(st.integers(1, 5))
    frames_labels = {}
    for i in range(n_frames):
        labels = draw(
            st.lists(st.sampled_from([MaskLabel.MASK, MaskLabel.NO_MASK]), max_size=10)
        )
        frames_labels[f"frame{i}"] = labels
    a = make_dataset(frames_labels)

    mutated_frames = []
    for frame in a.frames:
        new_faces = []
        for face in frame.faces:
            fate = draw(st.sampled_from(["keep", "flip", "remove"]))
            if fate == "remove":
                continue
            if fate == "flip":
                flipped = (
                    MaskLabel.NO_MASK
                    if face.label is MaskLabel.MASK
                    else MaskLabel.MASK
                )
                face = GroundTruthFace(face.box, flipped, face.id)
            new_faces.append(face)
        mutated_frames.append(
            FrameAnnotation(
                frame.frame_id, frame.image_width, frame.image_height, tuple(new_faces)
            )
        )
    b = Dataset(a.name, a.split, tuple(mutated_frames))
    return a, b


class TestRelabelProperties:
    @settings(max_examples=200, deadline=None)
    @given(dataset_pairs())
    def test_apply_diff_roundtrip(self, pair):
        a, b = pair
        diff = diff_datasets(a, b)
        assert apply_relabel_diff(a, diff) == b

    @settings(max_examples=100, deadline=None)
    @given(dataset_pairs())
    def test_diff_serialization_roundtrips(self, pair):
        a, b = pair
        diff = diff_datasets(a, b)
        assert parse_relabel_diff(format_relabel_diff(diff)) == diff
        assert relabel_diff_from_json_obj(relabel_diff_to_json_obj(diff)) == diff


class TestDiffFiles:
    def test_text_format_shape(self):
        diff = RelabelDiff(
            (
                RelabelEntry(FaceId("img_1", 3), RelabelAction.SET_NO_MASK),
                RelabelEntry(FaceId("img_2", 0), RelabelAction.REMOVE),
            )
        )
        text = format_relabel_diff(diff)
        lines = text.split("\n")
        assert lines[0] == "#maskpipe-relabel v1"
        assert lines[1] == "img_1\t3\tSetNoMask"
        assert lines[2] == "img_2\t0\tRemove"
        assert text.endswith("\n") and "\r" not in text

    def test_missing_header_rejected(self):
        with pytest.raises(RelabelError, match="header"):
            parse_relabel_diff("img\t0\tRemove\n")

    def test_load_text_and_json(self, tmp_path):
        diff = RelabelDiff(
            (RelabelEntry(FaceId("img", 0), RelabelAction.SET_MASK),)
        )
        text_path = tmp_path / "d.diff"
        text_path.write_text(format_relabel_diff(diff), encoding="utf-8")
        json_path = tmp_path / "d.json"
        json_path.write_text(json.dumps(relabel_diff_to_json_obj(diff)))
        assert load_relabel_diff(text_path) == diff
        assert load_relabel_diff(json_path) == diff

    def test_converter_hook(self, tmp_path):
        path = tmp_path / "foreign.csv"
        path.write_text("img,4,SetMask\n")

        def converter(text):
            frame_id, index, action = text.strip().split(",")
            return RelabelDiff(
                (RelabelEntry(FaceId(frame_id, int(index)), RelabelAction(action)),)
            )

        diff = load_relabel_diff(path, converter=converter)
        assert diff.entries[0].face_id == FaceId("img", 4)


def make_relabel_fixture():
    """Synthetic dataset + diff replicating the published correction counts:

    82 Mask -> NoMask flips, 5 NoMask -> Mask flips, 2 faces removed.
    """
    frames_labels = {}
    # 30 frames x 3 masked faces = 90 masked, 10 frames x 2 exposed = 20.
    for i in range(30):
        frames_labels[f"m{i:03d}"] = [MaskLabel.MASK] * 3
    for i in range(10):
        frames_labels[f"n{i:03d}"] = [MaskLabel.NO_MASK] * 2
    ds = make_dataset(frames_labels, name="relabel-fixture")

    entries = []
    mask_ids = [f.id for f in ds.all_faces() if f.label is MaskLabel.MASK]
    nomask_ids = [f.id for f in ds.all_faces() if f.label is MaskLabel.NO_MASK]
    for fid in mask_ids[:82]:
        entries.append(RelabelEntry(fid, RelabelAction.SET_NO_MASK))
    for fid in nomask_ids[:5]:
        entries.append(RelabelEntry(fid, RelabelAction.SET_MASK))
    for fid in mask_ids[82:84]:
        entries.append(RelabelEntry(fid, RelabelAction.REMOVE))
    return ds, RelabelDiff(tuple(entries))


class TestRelabelFixture82_5_2:
    def test_counts_match_published_corrections(self):
        ds, diff = make_relabel_fixture()
        out = apply_relabel_diff(ds, diff)

        before = {f.id: f.label for f in ds.all_faces()}
        after = {f.id: f.label for f in out.all_faces()}
        to_no_mask = sum(
            1
            for fid, label in before.items()
            if fid in after and label is MaskLabel.MASK and after[fid] is MaskLabel.NO_MASK
        )
        to_mask = sum(
            1
            for fid, label in before.items()
            if fid in after and label is MaskLabel.NO_MASK and after[fid] is MaskLabel.MASK
        )
        removed = sum(1 for fid in before if fid not in after)
        assert (to_no_mask, to_mask, removed) == (82, 5, 2)
        assert len(out.frames) == len(ds.frames)
        assert dataset_stats(out).n_faces == dataset_stats(ds).n_faces - 2
