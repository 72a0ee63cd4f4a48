"""Geographic and detection data types, file formats and spherical areas."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .errors import DomainError, ParseError, UnknownScene, ValidationError

FORMAT_VERSION = 1
MARS_RADIUS_KM = 3389.5
DIAMETER_RANGE_KM = (0.2, 25.5)


def normalize_lon(lon: float) -> float:
    lon = float(lon) % 360.0
    # -tiny % 360 rounds up to exactly 360.0
    return 0.0 if lon >= 360.0 else lon


@dataclass(frozen=True)
class GeoPoint:
    lon_deg: float
    lat_deg: float

    def __post_init__(self):
        lat = float(self.lat_deg)
        if not -90.0 <= lat <= 90.0:
            raise ValidationError(f"latitude {self.lat_deg} outside [-90, 90]")
        object.__setattr__(self, "lat_deg", lat)
        object.__setattr__(self, "lon_deg", normalize_lon(self.lon_deg))


@dataclass(frozen=True)
class SceneRecord:
    scene_id: str
    center: GeoPoint
    width_px: int = 256
    height_px: int = 256
    gsd_m: float = 100.0

    @property
    def lat(self) -> float:
        return self.center.lat_deg

    @property
    def lon(self) -> float:
        return self.center.lon_deg

    @property
    def extent_km(self) -> tuple[float, float]:
        return self.width_px * self.gsd_m / 1000.0, self.height_px * self.gsd_m / 1000.0


@dataclass(frozen=True)
class BBox:
    """Pixel-space box; ``(x, y)`` is the top-left corner."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValidationError(f"box {self.as_list()} must have positive width and height")

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.w, self.h]

    @property
    def area(self) -> float:
        return self.w * self.h

    def clipped(self, width: float, height: float) -> "BBox":
        """Clip to ``[0, width] x [0, height]``; a box with no overlap is an error."""
        x0, y0 = max(self.x, 0.0), max(self.y, 0.0)
        x1, y1 = min(self.x + self.w, width), min(self.y + self.h, height)
        if x1 <= x0 or y1 <= y0:
            raise ValidationError(f"box {self.as_list()} lies outside the {width}x{height} scene")
        if (x0, y0, x1 - x0, y1 - y0) == (self.x, self.y, self.w, self.h):
            return self
        return BBox(x0, y0, x1 - x0, y1 - y0)


@dataclass(frozen=True)
class GroundTruthBox:
    scene_id: str
    bbox: BBox
    diameter_km: float | None = None


@dataclass(frozen=True)
class Detection:
    scene_id: str
    bbox: BBox
    score: float


class SceneSet:
    """Scenes in manifest order, indexed by id."""

    def __init__(self, scenes: Iterable[SceneRecord] = ()):
        self._scenes: list[SceneRecord] = []
        self._index: dict[str, int] = {}
        for s in scenes:
            if s.scene_id in self._index:
                raise ValidationError(f"duplicate scene_id {s.scene_id!r}")
            self._index[s.scene_id] = len(self._scenes)
            self._scenes.append(s)

    def __len__(self):
        return len(self._scenes)

    def __iter__(self) -> Iterator[SceneRecord]:
        return iter(self._scenes)

    def __getitem__(self, scene_id: str) -> SceneRecord:
        return self._scenes[self._index[scene_id]]

    def __contains__(self, scene_id) -> bool:
        return scene_id in self._index

    def index(self, scene_id: str) -> int:
        return self._index[scene_id]

    @property
    def ids(self) -> list[str]:
        return [s.scene_id for s in self._scenes]


# canonical JSON ---------------------------------------------------------------

def format_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"non-finite float {x!r} cannot be serialized")
    s = format(x, ".17g")
    if "." not in s and "e" not in s:
        s += ".0"
    return s


def _encode(obj, out: list[str]):
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(format_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        out.append("{")
        for i, key in enumerate(sorted(obj)):
            if i:
                out.append(",")
            out.append(json.dumps(str(key), ensure_ascii=False))
            out.append(":")
            _encode(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(",")
            _encode(item, out)
        out.append("]")
    elif hasattr(obj, "item"):  # numpy scalar
        _encode(obj.item(), out)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def canonical_dumps(obj) -> str:
    """Sorted keys, no whitespace, 17 significant digits for floats."""
    out: list[str] = []
    _encode(obj, out)
    return "".join(out) + "\n"


def write_canonical(path, obj) -> None:
    Path(path).write_text(canonical_dumps(obj), encoding="utf-8")


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _read_json(path, what: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"cannot read {what} {path}: {e.strerror}") from e
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: malformed JSON ({e.msg} at line {e.lineno})") from e
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be a JSON object")
    if doc.get("format_version") != FORMAT_VERSION:
        raise ParseError(f"{path}: unsupported format_version {doc.get('format_version')!r}")
    return doc


def _num(rec: dict, key: str, where: str, default=None) -> float:
    v = rec.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValidationError(f"{where}: field {key!r} must be a number, got {v!r}")
    if not math.isfinite(v):
        raise ValidationError(f"{where}: field {key!r} is not finite")
    return float(v)


def _pos_int(rec: dict, key: str, where: str, default: int) -> int:
    v = rec.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int) or v <= 0:
        if isinstance(v, float) and v.is_integer() and v > 0:
            return int(v)
        raise ValidationError(f"{where}: field {key!r} must be a positive integer, got {v!r}")
    return v


def _bbox(rec: dict, where: str) -> BBox:
    raw = rec.get("bbox")
    if not isinstance(raw, list) or len(raw) != 4:
        raise ValidationError(f"{where}: bbox must be [x, y, w, h]")
    vals = []
    for v in raw:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ValidationError(f"{where}: bbox entries must be finite numbers")
        vals.append(float(v))
    try:
        return BBox(*vals)
    except ValidationError as e:
        raise ValidationError(f"{where}: {e.args[0]}") from None


# manifest -----------------------------------------------------------------------

def parse_manifest(doc: dict, source: str = "manifest") -> SceneSet:
    recs = doc.get("scenes")
    if not isinstance(recs, list):
        raise ParseError(f"{source}: 'scenes' must be a list")
    scenes = []
    seen = set()
    for i, rec in enumerate(recs):
        if not isinstance(rec, dict):
            raise ValidationError(f"scene #{i}: record must be an object")
        sid = rec.get("scene_id")
        if not isinstance(sid, str) or not sid:
            raise ValidationError(f"scene #{i}: scene_id must be a non-empty string")
        where = f"scene {sid!r}"
        if sid in seen:
            raise ValidationError(f"{where}: duplicate scene_id {sid!r}")
        seen.add(sid)
        try:
            center = GeoPoint(_num(rec, "lon_deg", where), _num(rec, "lat_deg", where))
        except ValidationError as e:
            msg = e.args[0]
            raise ValidationError(msg if msg.startswith(where) else f"{where}: {msg}") from None
        gsd = _num(rec, "gsd_m", where, 100.0)
        if gsd <= 0:
            raise ValidationError(f"{where}: gsd_m must be positive")
        scenes.append(SceneRecord(
            sid, center,
            _pos_int(rec, "width_px", where, 256),
            _pos_int(rec, "height_px", where, 256),
            gsd,
        ))
    return SceneSet(scenes)


def load_manifest(path) -> SceneSet:
    return parse_manifest(_read_json(path, "manifest"), str(path))


def manifest_doc(scenes: Iterable[SceneRecord]) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "scenes": [
            {
                "scene_id": s.scene_id,
                "lon_deg": float(s.center.lon_deg),
                "lat_deg": float(s.center.lat_deg),
                "width_px": int(s.width_px),
                "height_px": int(s.height_px),
                "gsd_m": float(s.gsd_m),
            }
            for s in scenes
        ],
    }


def dump_manifest(path, scenes) -> None:
    write_canonical(path, manifest_doc(scenes))


# annotations / detections ---------------------------------------------------------

def parse_annotations(doc: dict, scenes: SceneSet, source: str = "annotations") -> list[GroundTruthBox]:
    recs = doc.get("boxes")
    if not isinstance(recs, list):
        raise ParseError(f"{source}: 'boxes' must be a list")
    lo, hi = DIAMETER_RANGE_KM
    out = []
    for i, rec in enumerate(recs):
        if not isinstance(rec, dict):
            raise ValidationError(f"box #{i}: record must be an object")
        sid = rec.get("scene_id")
        where = f"box #{i} (scene {sid!r})"
        if sid not in scenes:
            raise UnknownScene(f"{where}: unknown scene_id {sid!r}")
        scene = scenes[sid]
        bbox = _bbox(rec, where)
        try:
            bbox = bbox.clipped(scene.width_px, scene.height_px)
        except ValidationError as e:
            raise ValidationError(f"{where}: {e.args[0]}") from None
        diam = rec.get("diameter_km")
        if diam is not None:
            diam = _num(rec, "diameter_km", where)
            if not lo <= diam <= hi:
                raise ValidationError(f"{where}: diameter_km {diam} outside [{lo}, {hi}]")
        out.append(GroundTruthBox(sid, bbox, diam))
    return out


def load_annotations(path, scenes: SceneSet) -> list[GroundTruthBox]:
    return parse_annotations(_read_json(path, "annotations"), scenes, str(path))


def annotations_doc(boxes: Iterable[GroundTruthBox]) -> dict:
    recs = []
    for b in boxes:
        rec = {"scene_id": b.scene_id, "bbox": [float(v) for v in b.bbox.as_list()]}
        if b.diameter_km is not None:
            rec["diameter_km"] = float(b.diameter_km)
        recs.append(rec)
    return {"format_version": FORMAT_VERSION, "boxes": recs}


def dump_annotations(path, boxes) -> None:
    write_canonical(path, annotations_doc(boxes))


def parse_detections(doc: dict, scenes: SceneSet, source: str = "detections") -> list[Detection]:
    recs = doc.get("detections")
    if not isinstance(recs, list):
        raise ParseError(f"{source}: 'detections' must be a list")
    out = []
    for i, rec in enumerate(recs):
        if not isinstance(rec, dict):
            raise ValidationError(f"detection #{i}: record must be an object")
        sid = rec.get("scene_id")
        where = f"detection #{i} (scene {sid!r})"
        if sid not in scenes:
            raise UnknownScene(f"{where}: unknown scene_id {sid!r}")
        scene = scenes[sid]
        score = _num(rec, "score", where)
        if not 0.0 <= score <= 1.0:
            raise ValidationError(f"{where}: score {score} outside [0, 1]")
        bbox = _bbox(rec, where)
        try:
            bbox = bbox.clipped(scene.width_px, scene.height_px)
        except ValidationError as e:
            raise ValidationError(f"{where}: {e.args[0]}") from None
        out.append(Detection(sid, bbox, score))
    return out


def load_detections(path, scenes: SceneSet) -> list[Detection]:
    return parse_detections(_read_json(path, "detections"), scenes, str(path))


def detections_doc(dets: Iterable[Detection]) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "detections": [
            {"scene_id": d.scene_id, "bbox": [float(v) for v in d.bbox.as_list()],
             "score": float(d.score)}
            for d in dets
        ],
    }


def dump_detections(path, dets) -> None:
    write_canonical(path, detections_doc(dets))


# geometry ---------------------------------------------------------------------------

def spherical_cell_area(lat_lo: float, lat_hi: float, lon_lo: float, lon_hi: float,
                        radius_km: float = MARS_RADIUS_KM) -> float:
    """Area in km^2 of a lat/lon cell on a sphere: R^2 (sin lat_hi - sin lat_lo) dlon."""
    if not (-90.0 <= lat_lo < lat_hi <= 90.0):
        raise DomainError(f"latitude bounds [{lat_lo}, {lat_hi}] must satisfy -90 <= lo < hi <= 90")
    dlon = lon_hi - lon_lo
    if not 0.0 < dlon <= 360.0:
        raise DomainError(f"longitude extent {dlon} must lie in (0, 360]")
    if not radius_km > 0:
        raise DomainError(f"radius must be positive, got {radius_km}")
    band = math.sin(math.radians(lat_hi)) - math.sin(math.radians(lat_lo))
    return radius_km * radius_km * band * math.radians(dlon)
