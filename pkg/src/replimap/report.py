"""Report artifacts: replicability-map GeoJSON/CSV, stats.json and run_meta.json.

Every writer produces deterministic bytes: canonical JSON, fixed column
order, ``\\n`` line endings and no timestamps.
"""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .deteval import RegionScore
from .errors import ParseError
from .geomodel import FORMAT_VERSION, canonical_dumps, file_digest, format_float, write_canonical
from .partition import Region

MAP_COLUMNS = ("region_id", "lat_lo", "lat_hi", "lon_lo", "lon_hi", "map50", "n_scenes", "n_gt", "n_det")


def _geo_lon(lon: float, lo: float, hi: float) -> float:
    # shift cells east of the antimeridian into [-180, 0]; straddling cells keep 0..360
    return lon - 360.0 if lo >= 180.0 and hi <= 360.0 else lon


def region_polygon(r: Region) -> dict:
    lo, hi = _geo_lon(r.lon_lo, r.lon_lo, r.lon_hi), _geo_lon(r.lon_hi, r.lon_lo, r.lon_hi)
    ring = [[lo, r.lat_lo], [hi, r.lat_lo], [hi, r.lat_hi], [lo, r.lat_hi], [lo, r.lat_lo]]
    return {"type": "Polygon", "coordinates": [[[float(x), float(y)] for x, y in ring]]}


def map_features(regions: Sequence[Region], scores: Sequence[RegionScore], extra: dict | None = None) -> list[dict]:
    feats = []
    for r, s in zip(regions, scores):
        props = {"region_id": r.region_id, "n_scenes": s.n_scenes, "n_gt": s.n_gt, "n_det": s.n_det}
        if s.map50 is not None:
            props["map50"] = float(s.map50)
        if extra:
            props.update(extra)
        feats.append({"type": "Feature", "geometry": region_polygon(r), "properties": props})
    return feats


def geojson_doc(features: list[dict], scheme: dict | None = None) -> dict:
    doc = {"type": "FeatureCollection", "format_version": FORMAT_VERSION, "features": features}
    if scheme is not None:
        doc["scheme"] = scheme
    return doc


def map_rows(regions: Sequence[Region], scores: Sequence[RegionScore]) -> list[dict]:
    out = []
    for r, s in zip(regions, scores):
        row = r.as_dict()
        row.update(map50=s.map50, n_scenes=s.n_scenes, n_gt=s.n_gt, n_det=s.n_det)
        out.append(row)
    return out


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return format_float(v)
    return str(v)


def csv_text(rows: Iterable[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def write_text(path, text: str) -> None:
    Path(path).write_bytes(text.encode("utf-8"))


def write_map(outdir, regions, scores, fmt: str = "both", scheme: dict | None = None) -> list[str]:
    """Write ``map.geojson`` and/or ``map.csv``; returns the file names written."""
    outdir = Path(outdir)
    written = []
    if fmt in ("geojson", "both"):
        write_canonical(outdir / "map.geojson", geojson_doc(map_features(regions, scores), scheme))
        written.append("map.geojson")
    if fmt in ("csv", "both"):
        write_text(outdir / "map.csv", csv_text(map_rows(regions, scores), MAP_COLUMNS))
        written.append("map.csv")
    return written


# stats.json ----------------------------------------------------------------------

def load_stats(path) -> dict:
    path = Path(path)
    if not path.exists():
        return {"format_version": FORMAT_VERSION, "entries": []}
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: malformed JSON ({e.msg} at line {e.lineno})") from e
    if not isinstance(doc, dict) or not isinstance(doc.get("entries"), list):
        raise ParseError(f"{path}: not a stats document")
    return doc


def append_stats(path, entries: Sequence[dict]) -> dict:
    doc = load_stats(path)
    doc["entries"].extend(entries)
    write_canonical(path, doc)
    return doc


def stats_doc(entries: Sequence[dict]) -> dict:
    return {"format_version": FORMAT_VERSION, "entries": list(entries)}


# provenance ------------------------------------------------------------------------

def run_meta(command: str, config: dict, inputs: dict[str, str] | None = None,
             outputs: Sequence[Path] = ()) -> dict:
    """Provenance record; ``inputs`` maps a role to a path and is stored with sha256 digests."""
    return {
        "format_version": FORMAT_VERSION,
        "tool": "replimap",
        "version": __version__,
        "command": command,
        "config": config,
        "inputs": {role: {"path": Path(p).name, "sha256": file_digest(p)}
                   for role, p in sorted((inputs or {}).items())},
        "outputs": {Path(p).name: file_digest(p) for p in sorted(outputs, key=lambda q: Path(q).name)},
    }


def write_run_meta(outdir, command: str, config: dict, inputs: dict[str, str] | None = None) -> Path:
    """Write ``run_meta.json`` covering every other file already in ``outdir``."""
    outdir = Path(outdir)
    outputs = [p for p in outdir.iterdir() if p.is_file() and p.name != "run_meta.json"]
    path = outdir / "run_meta.json"
    write_canonical(path, run_meta(command, config, inputs, outputs))
    return path


def dumps(obj) -> str:
    return canonical_dumps(obj)
