"""Seeded synthetic crater world."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..geomodel import (BBox, GeoPoint, GroundTruthBox, SceneRecord, SceneSet, annotations_doc,
                        manifest_doc)
from ..rng import RngStream, StreamBatch


@dataclass(frozen=True)
class SyntheticWorld:
    """Scenes plus padded per-scene ground truth.

    ``gt_boxes[s, j]`` is the j-th crater of scene ``s`` (xywh, pixels);
    ``gt_valid`` marks real entries and ``diam_km`` their diameters.
    """

    seed: int
    lat: np.ndarray
    lon: np.ndarray
    gt_boxes: np.ndarray
    gt_valid: np.ndarray
    diam_km: np.ndarray
    width_px: int = 256
    height_px: int = 256
    gsd_m: float = 100.0

    @property
    def n_scenes(self) -> int:
        return self.lat.size

    @property
    def n_gt(self) -> int:
        return int(self.gt_valid.sum())

    def scene_id(self, i: int) -> str:
        return f"s{i:06d}"

    @cached_property
    def scenes(self) -> SceneSet:
        return SceneSet(
            SceneRecord(self.scene_id(i), GeoPoint(float(self.lon[i]), float(self.lat[i])),
                        self.width_px, self.height_px, self.gsd_m)
            for i in range(self.n_scenes)
        )

    @cached_property
    def boxes(self) -> list[GroundTruthBox]:
        out = []
        for s, j in zip(*np.nonzero(self.gt_valid)):
            x, y, w, h = (float(v) for v in self.gt_boxes[s, j])
            out.append(GroundTruthBox(self.scene_id(int(s)), BBox(x, y, w, h), float(self.diam_km[s, j])))
        return out

    def manifest_doc(self) -> dict:
        return manifest_doc(self.scenes)

    def annotations_doc(self) -> dict:
        return annotations_doc(self.boxes)


def log_uniform(u, lo: float, hi: float) -> np.ndarray:
    return np.clip(np.exp(math.log(lo) + u * (math.log(hi) - math.log(lo))), lo, hi)


def gen_world(seed: int, n_scenes: int, craters_per_scene: float = 8.0, width_px: int = 256,
              height_px: int = 256, gsd_m: float = 100.0, diameter_km_min: float = 0.2,
              diameter_km_max: float = 25.5) -> SyntheticWorld:
    """Scenes with latitude density proportional to cos(lat) and Poisson crater counts.

    Scene ``i`` draws from substream ``scene:i`` of ``RngStream(seed, "world")``,
    so a scene does not change when ``n_scenes`` grows.
    """
    if n_scenes < 1:
        raise ValueError("n_scenes must be >= 1")
    batch = StreamBatch.children(RngStream(seed, "world"), [f"scene:{i}" for i in range(n_scenes)])
    lat = np.degrees(np.arcsin(2.0 * batch.uniform() - 1.0))
    lon = 360.0 * batch.uniform()
    lon = np.where(lon >= 360.0, 0.0, lon)
    counts = batch.poisson(craters_per_scene)
    g = int(counts.max(initial=0))
    boxes = np.zeros((n_scenes, g, 4))
    diam = np.zeros((n_scenes, g))
    valid = np.arange(g)[None, :] < counts[:, None]
    px_per_km = 1000.0 / gsd_m
    for j in range(g):
        m = valid[:, j]
        d = log_uniform(batch.uniform(m), diameter_km_min, diameter_km_max)
        side = d * px_per_km
        x = batch.uniform(m) * (width_px - side)
        y = batch.uniform(m) * (height_px - side)
        boxes[:, j] = np.where(m[:, None], np.stack([x, y, side, side], axis=1), 0.0)
        diam[:, j] = np.where(m, d, 0.0)
    return SyntheticWorld(seed, lat, lon, boxes, valid, diam, width_px, height_px, gsd_m)


def world_from_config(seed: int, cfg: dict, n_scenes: int | None = None) -> SyntheticWorld:
    w = dict(cfg["world"])
    if n_scenes is not None:
        w["n_scenes"] = n_scenes
    return gen_world(seed, **w)
