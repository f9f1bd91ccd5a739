"""
Annotation and detection I/O: DOTA text, axis-aligned tables, rotated-box
and detection documents, format dispatch and aspect-ratio summaries.
"""

import json
import math

import pandas as pd
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from src.core.exceptions import (
    AnnotationBoxError,
    ConfigError,
    InvalidBox,
    KcrError,
    ParseError,
    SchemaVersionError,
)
from src.data import (
    aspect_ratio_summary,
    object_frame,
    parse_axis_aligned,
    parse_dota,
    parse_rotated_boxes,
    read_annotations,
    read_detections,
    read_detections_file,
    read_dota_directory,
    render_annotations,
    to_axis_aligned_records,
    to_rotated_records,
    write_axis_aligned,
    write_detections,
    write_detections_file,
    write_dota,
    write_dota_directory,
    write_rotated_boxes,
)
from src.geometry import project_rotated, rotated_to_quad
from src.objects.annotations import AnnotationObject, AnnotationRecord
from src.objects.boxes import AABox, Quad, RotatedBox
from src.objects.detections import Detection, DetectionFile
from tests.conftest import rotated_boxes

SHIP_LINE = "0 0 2 0 2 1 0 1 ship 0"


def detection_doc(items, version=1, schema="kcr.detections"):
    return json.dumps({"schema": schema, "version": version, "images": {"a": items}})


# =============================================================================
# DOTA TEXT
# =============================================================================

class TestParseDota:

    def test_single_line(self):
        record = parse_dota(SHIP_LINE, image_id="P0001")
        assert record.image_id == "P0001"
        assert len(record) == 1
        obj = record.objects[0]
        assert obj.label == "ship"
        assert obj.difficult is False
        assert obj.to_rotated().same_rectangle(RotatedBox(1.0, 0.5, 2.0, 1.0, 0.0))

    def test_headers_go_to_metadata(self):
        text = "imagesource:GoogleEarth\ngsd:0.146343590398\n" + SHIP_LINE + "\n"
        record = parse_dota(text)
        assert record.metadata == {"imagesource": "GoogleEarth", "gsd": "0.146343590398"}
        assert len(record) == 1

    def test_blank_lines_and_difficult_flag(self):
        text = "\n" + SHIP_LINE + "\n\n10 10 14 10 14 12 10 12 small-vehicle 1\n"
        record = parse_dota(text)
        assert record.labels() == ("ship", "small-vehicle")
        assert record.difficult_mask().tolist() == [False, True]

    def test_clockwise_quad_is_stored_counter_clockwise(self):
        record = parse_dota("0 0 0 1 2 1 2 0 ship 0")
        assert record.objects[0].shape.area == pytest.approx(2.0)

    def test_empty_text(self):
        assert len(parse_dota("")) == 0

    def test_wrong_field_count_reports_line(self):
        text = "imagesource:x\n" + SHIP_LINE + "\n0 0 2 0 2 1 0 ship 0\n"
        with pytest.raises(ParseError) as info:
            parse_dota(text)
        assert info.value.line == 3
        assert "line 3" in str(info.value)

    def test_non_numeric_coordinate(self):
        with pytest.raises(ParseError) as info:
            parse_dota("a 0 2 0 2 1 0 1 ship 0")
        assert info.value.line == 1
        assert info.value.field == "x1"

    @pytest.mark.parametrize("token", ["nan", "inf", "-inf", "1e10"])
    def test_unusable_coordinates(self, token):
        with pytest.raises(ParseError) as info:
            parse_dota(f"0 0 2 0 2 {token} 0 1 ship 0")
        assert info.value.field == "y3"

    def test_unknown_difficulty(self):
        with pytest.raises(ParseError) as info:
            parse_dota("0 0 2 0 2 1 0 1 ship 2")
        assert info.value.field == "difficulty"

    def test_collinear_quad(self):
        with pytest.raises(ParseError) as info:
            parse_dota(SHIP_LINE + "\n0 0 1 0 2 0 3 0 ship 0")
        assert info.value.line == 2
        assert info.value.field == "quad"

    def test_invalid_utf8_is_located(self):
        with pytest.raises(ParseError) as info:
            parse_dota(SHIP_LINE.encode() + b"\n\xff\xfe 0 0")
        assert info.value.line == 2


class TestWriteDota:

    def test_axis_aligned_shape_as_quad(self):
        record = AnnotationRecord("a", (AnnotationObject(AABox(0, 0, 2, 1), "ship", True),),
                                  {"gsd": "0.5", "imagesource": "GoogleEarth"})
        assert write_dota(record) == "imagesource:GoogleEarth\ngsd:0.5\n0 0 2 0 2 1 0 1 ship 1\n"

    def test_six_significant_digits(self):
        quad = Quad(((0.0, 0.0), (1234.56789, 0.0), (1234.56789, 1.0), (0.0, 1.0)))
        text = write_dota(AnnotationRecord("a", (AnnotationObject(quad, "ship"),)))
        assert text.split()[2] == "1234.57"

    def test_empty_record(self):
        assert write_dota(AnnotationRecord("a")) == ""

    def test_whitespace_label_rejected(self):
        record = AnnotationRecord("a", (AnnotationObject(AABox(0, 0, 1, 1), "small vehicle"),))
        with pytest.raises(InvalidBox):
            write_dota(record)

    @given(st.lists(rotated_boxes(extent=st.floats(1.0, 50.0)), min_size=1, max_size=5))
    def test_round_trip(self, boxes):
        record = AnnotationRecord("a", tuple(AnnotationObject(b, "ship") for b in boxes))
        back = parse_dota(write_dota(record), image_id="a")
        assert len(back) == len(boxes)
        for box, obj in zip(boxes, back.objects):
            assert obj.to_rotated().same_rectangle(box, tol=5e-3)

    def test_directory_round_trip(self, tmp_path):
        records = {
            "P0001": parse_dota(SHIP_LINE, image_id="P0001"),
            "P0002": parse_dota("10 10 14 10 14 12 10 12 plane 1", image_id="P0002"),
        }
        paths = write_dota_directory(records, tmp_path / "labels")
        assert [p.name for p in paths] == ["P0001.txt", "P0002.txt"]
        back = read_dota_directory(tmp_path / "labels")
        assert list(back) == ["P0001", "P0002"]
        assert back["P0002"].image_id == "P0002"
        assert back["P0002"].labels() == ("plane",)

    def test_missing_directory_reads_nothing(self, tmp_path):
        assert read_dota_directory(tmp_path / "absent") == {}


# =============================================================================
# AXIS-ALIGNED TABLES
# =============================================================================

CSV_TEXT = (
    "image_id,xmin,ymin,xmax,ymax,label,difficult\n"
    "img1,0,0,10,5,apple,0\n"
    "img2,1,1,3,4,pear,1\n"
    "\n"
    "img1,20,20,30,22,apple\n"
)

JSON_TEXT = json.dumps({"annotations": [
    {"image_id": "img1", "xmin": 0, "ymin": 0, "xmax": 10, "ymax": 5, "label": "apple", "difficult": False},
    {"image_id": "img2", "xmin": 1, "ymin": 1, "xmax": 3, "ymax": 4, "label": "pear", "difficult": True},
    {"image_id": "img1", "xmin": 20, "ymin": 20, "xmax": 30, "ymax": 22, "label": "apple"},
]})


class TestAxisAligned:

    def test_csv_groups_by_image(self):
        records = parse_axis_aligned(CSV_TEXT, "csv")
        assert list(records) == ["img1", "img2"]
        assert [obj.shape for obj in records["img1"].objects] == [AABox(0, 0, 10, 5), AABox(20, 20, 30, 22)]
        assert records["img2"].objects[0].difficult is True

    def test_csv_without_header(self):
        records = parse_axis_aligned("img1,0,0,10,5,apple\n", "csv")
        assert records["img1"].objects[0].shape == AABox(0, 0, 10, 5)

    def test_json_and_csv_agree(self):
        assert parse_axis_aligned(JSON_TEXT, "json") == parse_axis_aligned(CSV_TEXT, "csv")

    def test_json_bare_list(self):
        items = json.loads(JSON_TEXT)["annotations"]
        assert parse_axis_aligned(json.dumps(items), "json") == parse_axis_aligned(JSON_TEXT, "json")

    def test_inverted_box_csv(self):
        with pytest.raises(AnnotationBoxError) as info:
            parse_axis_aligned("image_id,xmin,ymin,xmax,ymax,label\nimg1,10,0,5,5,apple\n", "csv")
        assert info.value.line == 2
        assert isinstance(info.value, InvalidBox)

    def test_inverted_box_json(self):
        doc = json.dumps([{"image_id": "a", "xmin": 0, "ymin": 9, "xmax": 1, "ymax": 2, "label": "x"}])
        with pytest.raises(AnnotationBoxError) as info:
            parse_axis_aligned(doc, "json")
        assert info.value.field == "annotations[0].ymin"

    def test_wrong_field_count(self):
        with pytest.raises(ParseError) as info:
            parse_axis_aligned("img1,0,0,10,5,apple\nimg1,0,0,10\n", "csv")
        assert info.value.line == 2

    def test_bad_number_located(self):
        doc = json.dumps([{"image_id": "a", "xmin": "left", "ymin": 0, "xmax": 1, "ymax": 2, "label": "x"}])
        with pytest.raises(ParseError) as info:
            parse_axis_aligned(doc, "json")
        assert info.value.field == "annotations[0].xmin"

    def test_invalid_json_reports_line(self):
        with pytest.raises(ParseError) as info:
            parse_axis_aligned('[\n{"image_id": "a",\n oops}]', "json")
        assert info.value.line == 3

    def test_unknown_format(self):
        with pytest.raises(ParseError):
            parse_axis_aligned(CSV_TEXT, "xml")

    def test_empty_inputs(self):
        assert parse_axis_aligned("", "csv") == {}
        assert parse_axis_aligned("[]", "json") == {}

    @pytest.mark.parametrize("fmt", ["csv", "json"])
    def test_write_then_parse(self, fmt):
        records = parse_axis_aligned(CSV_TEXT, "csv")
        assert parse_axis_aligned(write_axis_aligned(records, fmt), fmt) == records


# =============================================================================
# ROTATED-BOX DOCUMENTS
# =============================================================================

class TestRotatedBoxes:

    def test_round_trip(self):
        records = {
            "b": AnnotationRecord("b", (AnnotationObject(RotatedBox(3, 4, 5, 2, 0.3), "ship", True),)),
            "a": AnnotationRecord("a", (AnnotationObject(RotatedBox(0, 0, 1, 1, -0.7), "plane"),)),
        }
        text = write_rotated_boxes(records)
        assert list(json.loads(text)["images"]) == ["a", "b"]
        assert parse_rotated_boxes(text) == records

    def test_defaults(self):
        doc = {"schema": "kcr.rotated_boxes", "version": 1,
               "images": {"a": [{"cx": 0, "cy": 0, "w": 2, "h": 1, "theta": 0}]}}
        obj = parse_rotated_boxes(json.dumps(doc))["a"].objects[0]
        assert (obj.label, obj.difficult) == ("object", False)

    def test_non_positive_extent(self):
        doc = {"schema": "kcr.rotated_boxes", "version": 1,
               "images": {"a": [{"cx": 0, "cy": 0, "w": -2, "h": 1, "theta": 0}]}}
        with pytest.raises(AnnotationBoxError) as info:
            parse_rotated_boxes(json.dumps(doc))
        assert info.value.field == "images.a[0]"

    def test_missing_key(self):
        doc = {"schema": "kcr.rotated_boxes", "version": 1, "images": {"a": [{"cy": 0, "w": 2, "h": 1, "theta": 0}]}}
        with pytest.raises(ParseError) as info:
            parse_rotated_boxes(json.dumps(doc))
        assert info.value.field == "images.a[0].cx"

    def test_wrong_schema(self):
        with pytest.raises(SchemaVersionError):
            parse_rotated_boxes(json.dumps({"schema": "kcr.detections", "version": 1, "images": {}}))


# =============================================================================
# DETECTION FILES
# =============================================================================

class TestDetections:

    def test_round_trip(self, tmp_path):
        detections = DetectionFile({
            "img2": [Detection(RotatedBox(1.5, 2.0, 4.0, 1.0, 0.25), 0.9)],
            "img1": [Detection(RotatedBox(0.0, 0.0, 2.0, 2.0, -1.2), 0.125, class_id=3),
                     Detection(RotatedBox(10.0, 10.0, 3.0, 1.0, 0.0), 1.0)],
        })
        assert read_detections(write_detections(detections)) == detections
        path = write_detections_file(tmp_path / "dets.json", detections, pretty=True)
        assert read_detections_file(path) == detections

    def test_empty_file(self):
        empty = read_detections('{"schema": "kcr.detections", "version": 1, "images": {}}')
        assert len(empty) == 0
        assert empty.image_ids() == []

    def test_image_without_detections(self):
        assert read_detections(detection_doc([])).images == {"a": []}

    @pytest.mark.parametrize("version", [2, 0, "1", True, None])
    def test_version_mismatch(self, version):
        with pytest.raises(SchemaVersionError) as info:
            read_detections(detection_doc([], version=version))
        assert info.value.field == "version"

    def test_schema_mismatch(self):
        with pytest.raises(SchemaVersionError):
            read_detections(detection_doc([], schema="kcr.rotated_boxes"))

    def test_top_level_must_be_object(self):
        with pytest.raises(ParseError):
            read_detections("[]")

    @pytest.mark.parametrize("item, field", [
        ({"cx": 0, "cy": 0, "w": 1, "h": 1, "theta": math.pi / 2, "score": 0.5}, "images.a[0].theta"),
        ({"cx": 0, "cy": 0, "w": 1, "h": 1, "theta": 0, "score": 1.5}, "images.a[0].score"),
        ({"cx": 0, "cy": 0, "w": 1, "h": 1, "theta": 0, "score": 0.5, "class_id": "car"}, "images.a[0].class_id"),
        ({"cx": 0, "cy": 0, "w": 0, "h": 1, "theta": 0, "score": 0.5}, "images.a[0]"),
        ({"cx": 0, "cy": 0, "w": 1, "h": 1, "theta": 0}, "images.a[0].score"),
        ({"cx": True, "cy": 0, "w": 1, "h": 1, "theta": 0, "score": 0.5}, "images.a[0].cx"),
    ])
    def test_invalid_detection_located(self, item, field):
        with pytest.raises(ParseError) as info:
            read_detections(detection_doc([item]))
        assert info.value.field == field


# =============================================================================
# CONVERSION AND FORMAT DISPATCH
# =============================================================================

class TestConvert:

    def test_quads_to_axis_aligned(self):
        box = RotatedBox(5, 5, 4, 2, 0.4)
        record = AnnotationRecord("a", (AnnotationObject(rotated_to_quad(box), "ship"),))
        converted = to_axis_aligned_records({"a": record})
        shape = converted["a"].objects[0].shape
        expected = project_rotated(box)
        assert shape.as_tuple() == pytest.approx(expected.as_tuple(), abs=1e-9)

    def test_quads_to_rotated(self):
        box = RotatedBox(3, 4, 5, 2, 0.3)
        record = AnnotationRecord("a", (AnnotationObject(rotated_to_quad(box), "ship", True),))
        obj = to_rotated_records({"a": record})["a"].objects[0]
        assert isinstance(obj.shape, RotatedBox)
        assert obj.shape.same_rectangle(box, tol=1e-9)
        assert obj.difficult is True

    def test_dota_to_rotated_json(self, tmp_path):
        path = tmp_path / "P0001.txt"
        path.write_text(SHIP_LINE + "\n", encoding="utf-8")
        records = read_annotations(path, "dota")
        doc = json.loads(render_annotations(records, "rotated-json"))
        item = doc["images"]["P0001"][0]
        box = RotatedBox(item["cx"], item["cy"], item["w"], item["h"], item["theta"])
        assert box.same_rectangle(RotatedBox(1.0, 0.5, 2.0, 1.0, 0.0))

    def test_dota_identity(self, tmp_path):
        path = tmp_path / "P0001.txt"
        path.write_text("gsd:0.5\n" + SHIP_LINE + "\n", encoding="utf-8")
        assert render_annotations(read_annotations(path, "dota"), "dota") == "gsd:0.5\n" + SHIP_LINE + "\n"

    def test_axis_csv_from_dota(self, tmp_path):
        path = tmp_path / "P0001.txt"
        path.write_text(SHIP_LINE + "\n", encoding="utf-8")
        text = render_annotations(read_annotations(path, "dota"), "axis-csv")
        records = parse_axis_aligned(text, "csv")
        assert records["P0001"].objects[0].shape == AABox(0, 0, 2, 1)

    def test_dota_needs_one_record(self):
        records = parse_axis_aligned(CSV_TEXT, "csv")
        with pytest.raises(ConfigError):
            render_annotations(records, "dota")

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ConfigError):
            read_annotations(tmp_path / "x", "coco")

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_annotations(tmp_path / "absent.json", "rotated-json")


# =============================================================================
# ASPECT-RATIO SUMMARY
# =============================================================================

class TestSummary:

    @pytest.fixture
    def records(self):
        return {
            "a": AnnotationRecord("a", (
                AnnotationObject(RotatedBox(0, 0, 4, 1, 0.3), "ship"),
                AnnotationObject(AABox(0, 0, 2, 2), "car"),
            )),
            "b": AnnotationRecord("b", (AnnotationObject(RotatedBox(5, 5, 1, 6, -0.2), "ship", True),)),
        }

    def test_object_frame(self, records):
        frame = object_frame(records)
        assert frame["label"].tolist() == ["ship", "car", "ship"]
        assert frame["aspect_ratio"].tolist() == pytest.approx([4.0, 1.0, 6.0])
        assert frame["area"].tolist() == pytest.approx([4.0, 4.0, 6.0])

    def test_per_label_rows(self, records):
        summary = aspect_ratio_summary(records).set_index("label")
        assert list(summary.index) == ["car", "ship", "__all__"]
        assert summary.loc["ship", "count"] == 2
        assert summary.loc["ship", "median"] == pytest.approx(5.0)
        assert summary.loc["ship", "share_elongated"] == pytest.approx(1.0)
        assert summary.loc["__all__", "share_elongated"] == pytest.approx(2.0 / 3.0)
        assert summary.loc["car", "share_1_1.5"] == pytest.approx(1.0)
        assert summary.loc["ship", "share_3_5"] == pytest.approx(0.5)
        assert summary.loc["ship", "share_5_10"] == pytest.approx(0.5)

    def test_empty(self):
        summary = aspect_ratio_summary({})
        assert isinstance(summary, pd.DataFrame)
        assert summary.empty
        assert "share_elongated" in summary.columns


# =============================================================================
# FUZZING
# =============================================================================

def _parsers():
    return [
        lambda data: parse_dota(data),
        lambda data: parse_axis_aligned(data, "csv"),
        lambda data: parse_axis_aligned(data, "json"),
        lambda data: parse_rotated_boxes(data),
        lambda data: read_detections(data),
    ]


def _assert_total(data: bytes) -> None:
    for parse in _parsers():
        try:
            parse(data)
        except KcrError:
            pass


dota_like = st.lists(
    st.one_of(
        st.sampled_from(["0", "1", "2.5", "-3", "1e9", "1e10", "nan", "x", "ship", "imagesource:", "gsd:"]),
        st.text(max_size=6),
    ),
    max_size=12,
).map(lambda tokens: " ".join(tokens).encode("utf-8", errors="surrogatepass"))


class TestParsersAreTotal:
    """Any input either parses or raises a located library error."""

    @given(st.binary(max_size=256))
    @settings(max_examples=300, deadline=None)
    def test_random_bytes(self, data):
        _assert_total(data)

    @given(st.lists(dota_like, max_size=5).map(b"\n".join))
    @settings(max_examples=300, deadline=None, suppress_health_check=[HealthCheck.too_slow])
    def test_dota_shaped_lines(self, data):
        try:
            parse_dota(data)
        except KcrError:
            pass

    @pytest.mark.slow
    @given(st.binary(max_size=512))
    @settings(max_examples=100_000, deadline=None, suppress_health_check=[HealthCheck.too_slow])
    def test_random_bytes_full(self, data):
        _assert_total(data)
