import json

from replimap.deteval import RegionScore
from replimap.geomodel import file_digest
from replimap.partition import PartitionScheme, Region, make_partition
from replimap.report import (MAP_COLUMNS, append_stats, csv_text, load_stats, map_features, map_rows,
                             region_polygon, write_map, write_run_meta)


def _scores(regions, vals):
    return [RegionScore(r.region_id, v, 1 if v is not None else 0, 1 if v is not None else 0, 0)
            for r, v in zip(regions, vals)]


def test_null_map50_omitted_and_blank_in_csv():
    regions = make_partition(PartitionScheme.lat_strips(90))
    feats = map_features(regions, _scores(regions, [0.5, None]))
    assert feats[0]["properties"]["map50"] == 0.5
    assert "map50" not in feats[1]["properties"]
    text = csv_text(map_rows(regions, _scores(regions, [0.5, None])), MAP_COLUMNS)
    lines = text.splitlines()
    assert lines[0] == ",".join(MAP_COLUMNS)
    assert lines[2].split(",")[5] == ""
    assert "\r" not in text


def test_polygon_longitudes_shifted_east_of_antimeridian():
    ring = region_polygon(Region("grid:r00c20", 80, 90, 200, 210))["coordinates"][0]
    assert {x for x, _ in ring} == {-160.0, -150.0}
    ring = region_polygon(Region("lat:00", 80, 90, 0, 360))["coordinates"][0]
    assert {x for x, _ in ring} == {0.0, 360.0}
    assert ring[0] == ring[-1]


def test_write_map_formats(tmp_path):
    regions = make_partition(PartitionScheme.lon_strips())
    scores = _scores(regions, [0.1 * (i % 10) for i in range(18)])
    assert write_map(tmp_path, regions, scores, "csv") == ["map.csv"]
    assert write_map(tmp_path, regions, scores, "both", {"kind": "lon_strips", "d": 20.0}) == ["map.geojson", "map.csv"]
    doc = json.loads((tmp_path / "map.geojson").read_text())
    assert doc["type"] == "FeatureCollection" and doc["format_version"] == 1 and len(doc["features"]) == 18


def test_stats_append(tmp_path):
    p = tmp_path / "stats.json"
    append_stats(p, [{"test": "a"}])
    append_stats(p, [{"test": "b"}])
    assert [e["test"] for e in load_stats(p)["entries"]] == ["a", "b"]
    assert load_stats(p)["format_version"] == 1


def test_run_meta_digests(tmp_path):
    (tmp_path / "x.txt").write_text("hello")
    inp = tmp_path / "in.json"
    inp.write_text("{}")
    out = tmp_path / "out"
    out.mkdir()
    (out / "a.csv").write_text("1\n")
    meta = json.loads(write_run_meta(out, "cmd", {"k": 1}, {"input": inp}).read_text())
    assert meta["inputs"]["input"] == {"path": "in.json", "sha256": file_digest(inp)}
    assert meta["outputs"] == {"a.csv": file_digest(out / "a.csv")}
    assert meta["tool"] == "replimap" and meta["config"] == {"k": 1}
