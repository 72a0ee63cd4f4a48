import math

import pytest
from scipy import integrate

from replimap.errors import DomainError, ParseError, UnknownScene, ValidationError
from replimap.geomodel import (MARS_RADIUS_KM, BBox, GeoPoint, canonical_dumps, format_float,
                               load_annotations, load_detections, load_manifest, manifest_doc,
                               normalize_lon, parse_annotations, parse_manifest, spherical_cell_area)
from replimap.partition import PartitionScheme, make_partition

from conftest import write_json


def _manifest(*scenes):
    return {"format_version": 1, "scenes": list(scenes)}


def _scene(sid="s1", lat=5.0, lon=15.0, **kw):
    return {"scene_id": sid, "lat_deg": lat, "lon_deg": lon, **kw}


def test_single_scene_manifest(tmp_path):
    scenes = load_manifest(write_json(tmp_path / "m.json", _manifest(_scene())))
    assert len(scenes) == 1
    s = scenes["s1"]
    assert (s.lat, s.lon, s.width_px, s.height_px, s.gsd_m) == (5.0, 15.0, 256, 256, 100.0)
    assert s.extent_km == (25.6, 25.6)


def test_duplicate_scene_id_names_record():
    with pytest.raises(ValidationError, match="s1"):
        parse_manifest(_manifest(_scene(), _scene()))


@pytest.mark.parametrize("lat", [91.0, -90.5, float("nan")])
def test_latitude_out_of_range(lat):
    with pytest.raises(ValidationError):
        parse_manifest(_manifest(_scene(lat=lat)))


def test_longitude_normalized():
    assert normalize_lon(-10.0) == 350.0
    assert normalize_lon(360.0) == 0.0
    assert normalize_lon(-1e-18) == 0.0
    assert GeoPoint(-180.0, 0.0).lon_deg == 180.0


def test_malformed_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ParseError):
        load_manifest(p)
    p.write_text('{"format_version": 2, "scenes": []}')
    with pytest.raises(ParseError, match="format_version"):
        load_manifest(p)


def test_manifest_round_trip_bytes(tmp_path):
    doc = _manifest(_scene("a", 1.25, 359.5), _scene("b", -89.0, 0.1, width_px=128, gsd_m=12.5))
    text = canonical_dumps(doc)
    once = canonical_dumps(manifest_doc(parse_manifest(doc)))
    twice = canonical_dumps(manifest_doc(parse_manifest(__import__("json").loads(once))))
    assert once == twice
    assert once.endswith("\n") and '"format_version":1' in once
    assert text  # input itself need not be canonical


def test_annotation_inside_unchanged_and_clipping():
    scenes = parse_manifest(_manifest(_scene()))
    boxes = parse_annotations({"boxes": [{"scene_id": "s1", "bbox": [10, 20, 30, 40]},
                                         {"scene_id": "s1", "bbox": [250, 0, 20, 10]}]}, scenes)
    assert boxes[0].bbox == BBox(10, 20, 30, 40)
    assert boxes[1].bbox.w == 6.0 and boxes[1].bbox.x == 250.0


def test_annotation_errors():
    scenes = parse_manifest(_manifest(_scene()))
    with pytest.raises(ValidationError, match="diameter"):
        parse_annotations({"boxes": [{"scene_id": "s1", "bbox": [0, 0, 5, 5], "diameter_km": 30}]}, scenes)
    with pytest.raises(UnknownScene):
        parse_annotations({"boxes": [{"scene_id": "zz", "bbox": [0, 0, 5, 5]}]}, scenes)
    with pytest.raises(ValidationError, match="outside"):
        parse_annotations({"boxes": [{"scene_id": "s1", "bbox": [300, 0, 5, 5]}]}, scenes)
    with pytest.raises(ValidationError):
        parse_annotations({"boxes": [{"scene_id": "s1", "bbox": [0, 0, 0, 5]}]}, scenes)


def test_detection_score_range(tmp_path):
    scenes = load_manifest(write_json(tmp_path / "m.json", _manifest(_scene())))
    ok = write_json(tmp_path / "d.json", {"format_version": 1, "detections": [
        {"scene_id": "s1", "bbox": [0, 0, 5, 5], "score": 1.0}]})
    assert load_detections(ok, scenes)[0].score == 1.0
    bad = write_json(tmp_path / "d2.json", {"format_version": 1, "detections": [
        {"scene_id": "s1", "bbox": [0, 0, 5, 5], "score": 1.5}]})
    with pytest.raises(ValidationError, match="score"):
        load_detections(bad, scenes)
    gt = write_json(tmp_path / "g.json", {"format_version": 1, "boxes": []})
    assert load_annotations(gt, scenes) == []


def test_float_format():
    assert format_float(0.1) == "0.10000000000000001"
    assert format_float(2.0) == "2.0"
    assert float(format_float(1 / 3)) == 1 / 3
    with pytest.raises(ValueError):
        format_float(math.inf)


def test_full_sphere_area():
    r = 3389.5
    assert spherical_cell_area(-90, 90, 0, 360, r) == pytest.approx(4 * math.pi * r * r, rel=1e-12)


def test_zero_width_cell_rejected():
    with pytest.raises(DomainError):
        spherical_cell_area(0, 10, 20, 20)
    with pytest.raises(DomainError):
        spherical_cell_area(10, 0, 0, 10)


def test_equatorial_cell_matches_quadrature():
    r = MARS_RADIUS_KM
    area = spherical_cell_area(0, 10, 0, 10, r)
    quad, _ = integrate.dblquad(lambda phi, lam: r * r * math.cos(phi), 0, math.radians(10),
                                0, math.radians(10), epsabs=0, epsrel=1e-13)
    assert area == pytest.approx(quad, rel=1e-12)
    assert area == pytest.approx(3.4817e5, rel=1e-4)


@pytest.mark.parametrize("scheme", [PartitionScheme.grid(), PartitionScheme.lat_strips(),
                                    PartitionScheme.lon_strips(), PartitionScheme.grid(30, 45)])
def test_partition_areas_sum_to_sphere(scheme):
    total = math.fsum(spherical_cell_area(r.lat_lo, r.lat_hi, r.lon_lo, r.lon_hi)
                      for r in make_partition(scheme))
    assert total == pytest.approx(4 * math.pi * MARS_RADIUS_KM ** 2, rel=1e-12)
