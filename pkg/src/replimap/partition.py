"""Grid and strip partitions of the sphere and scene-to-region assignment.

Regions are ordered north to south, then west to east from 0 deg longitude.
Assignment uses the scene center with half-open ``[lo, hi)`` intervals; the
north pole belongs to the northernmost row.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DomainError
from .geomodel import FORMAT_VERSION, GroundTruthBox, SceneRecord, normalize_lon

KINDS = ("grid", "lat_strips", "lon_strips")


@dataclass(frozen=True)
class Region:
    region_id: str
    lat_lo: float
    lat_hi: float
    lon_lo: float
    lon_hi: float

    @property
    def center(self) -> tuple[float, float]:
        """(lat, lon) of the cell midpoint."""
        return (self.lat_lo + self.lat_hi) / 2.0, (self.lon_lo + self.lon_hi) / 2.0

    def as_dict(self) -> dict:
        return {"region_id": self.region_id, "lat_lo": float(self.lat_lo), "lat_hi": float(self.lat_hi),
                "lon_lo": float(self.lon_lo), "lon_hi": float(self.lon_hi)}


def _divides(d: float, extent: float) -> bool:
    if not d > 0:
        return False
    n = extent / d
    return abs(n - round(n)) < 1e-9 and round(n) >= 1


@dataclass(frozen=True)
class PartitionScheme:
    kind: str
    dlat: float = 10.0
    dlon: float = 10.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown partition kind {self.kind!r}")
        if self.kind in ("grid", "lat_strips") and not _divides(self.dlat, 180.0):
            raise DomainError(f"latitude step {self.dlat} does not divide 180")
        if self.kind in ("grid", "lon_strips") and not _divides(self.dlon, 360.0):
            raise DomainError(f"longitude step {self.dlon} does not divide 360")

    @classmethod
    def grid(cls, dlat=10.0, dlon=10.0):
        return cls("grid", float(dlat), float(dlon))

    @classmethod
    def lat_strips(cls, d=10.0):
        return cls("lat_strips", float(d), 360.0)

    @classmethod
    def lon_strips(cls, d=20.0):
        return cls("lon_strips", 180.0, float(d))

    @classmethod
    def from_name(cls, name: str) -> "PartitionScheme":
        """Short CLI names: ``grid10``, ``lat10``, ``lon20`` (any divisor works);
        ``grid30x45`` gives unequal grid steps."""
        for prefix, ctor in (("grid", cls.grid), ("lat", cls.lat_strips), ("lon", cls.lon_strips)):
            if name.startswith(prefix):
                parts = name[len(prefix):].split("x") if prefix == "grid" else [name[len(prefix):]]
                try:
                    ds = [float(t) for t in parts]
                except ValueError:
                    break
                if len(ds) == 1:
                    return ctor(ds[0], ds[0]) if prefix == "grid" else ctor(ds[0])
                if len(ds) == 2:
                    return ctor(*ds)
                break
        raise DomainError(f"unknown scheme {name!r} (expected grid10, lat10 or lon20)")

    @property
    def name(self) -> str:
        if self.kind == "grid":
            return f"grid{self.dlat:g}" if self.dlat == self.dlon else f"grid{self.dlat:g}x{self.dlon:g}"
        return f"lat{self.dlat:g}" if self.kind == "lat_strips" else f"lon{self.dlon:g}"

    @property
    def n_rows(self) -> int:
        return int(round(180.0 / self.dlat))

    @property
    def n_cols(self) -> int:
        return int(round(360.0 / self.dlon))

    def as_dict(self) -> dict:
        if self.kind == "grid":
            return {"kind": "grid", "dlat": float(self.dlat), "dlon": float(self.dlon)}
        if self.kind == "lat_strips":
            return {"kind": "lat_strips", "d": float(self.dlat)}
        return {"kind": "lon_strips", "d": float(self.dlon)}


def make_partition(scheme: PartitionScheme) -> list[Region]:
    rows, cols = scheme.n_rows, scheme.n_cols
    out = []
    for r in range(rows):
        lat_hi = 90.0 - r * scheme.dlat
        lat_lo = 90.0 - (r + 1) * scheme.dlat if r < rows - 1 else -90.0
        for c in range(cols):
            lon_lo = c * scheme.dlon
            lon_hi = (c + 1) * scheme.dlon if c < cols - 1 else 360.0
            if scheme.kind == "grid":
                rid = f"grid:r{r:02d}c{c:02d}"
            elif scheme.kind == "lat_strips":
                rid = f"lat:{r:02d}"
            else:
                rid = f"lon:{c:02d}"
            out.append(Region(rid, lat_lo, lat_hi, lon_lo, lon_hi))
    return out


def region_index(lat, lon, scheme: PartitionScheme):
    """Vectorised index into ``make_partition(scheme)``."""
    lat = np.asarray(lat, dtype=np.float64)
    lon = np.asarray(lon, dtype=np.float64) % 360.0
    lon = np.where(lon >= 360.0, 0.0, lon)
    rows, cols = scheme.n_rows, scheme.n_cols
    row = np.clip(np.floor((90.0 - lat) / scheme.dlat).astype(np.int64), 0, rows - 1)
    col = np.clip(np.floor(lon / scheme.dlon).astype(np.int64), 0, cols - 1)
    # the division can round across an edge; compare against the exact bounds
    row = np.where((row > 0) & (lat >= 90.0 - row * scheme.dlat), row - 1, row)
    row = np.where((row < rows - 1) & (lat < 90.0 - (row + 1) * scheme.dlat), row + 1, row)
    col = np.where((col > 0) & (lon < col * scheme.dlon), col - 1, col)
    col = np.where((col < cols - 1) & (lon >= (col + 1) * scheme.dlon), col + 1, col)
    return row * cols + col


def assign_point(lat: float, lon: float, scheme: PartitionScheme) -> int:
    return int(region_index(np.array([float(lat)]), np.array([normalize_lon(lon)]), scheme)[0])


def assign(scene: SceneRecord, scheme: PartitionScheme, regions: list[Region] | None = None) -> str:
    regions = regions if regions is not None else make_partition(scheme)
    return regions[assign_point(scene.lat, scene.lon, scheme)].region_id


@dataclass(frozen=True)
class RegionCount:
    region_id: str
    n_scenes: int
    n_gt: int

    @property
    def empty(self) -> bool:
        return self.n_scenes == 0


def region_census(scenes: Iterable[SceneRecord], annotations: Iterable[GroundTruthBox],
                  scheme: PartitionScheme) -> list[RegionCount]:
    regions = make_partition(scheme)
    n_scn = [0] * len(regions)
    n_gt = [0] * len(regions)
    where = {}
    for s in scenes:
        idx = assign_point(s.lat, s.lon, scheme)
        where[s.scene_id] = idx
        n_scn[idx] += 1
    for b in annotations:
        n_gt[where[b.scene_id]] += 1
    return [RegionCount(r.region_id, n_scn[i], n_gt[i]) for i, r in enumerate(regions)]


def regions_doc(scheme: PartitionScheme, regions: list[Region]) -> dict:
    return {"format_version": FORMAT_VERSION, "scheme": scheme.as_dict(),
            "regions": [r.as_dict() for r in regions]}
