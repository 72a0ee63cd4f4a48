"""Detection matching, average precision and per-region accuracy surfaces.

Single class (crater), so mAP50 is AP at IoU 0.5.  AP uses all-points
interpolation over one precision-recall curve pooled per region.  Ordering is
part of the contract: detections are ranked by score with ties kept in input
order (scene manifest order, then file order), so results are bitwise
reproducible.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError
from .geomodel import BBox, Detection, GroundTruthBox, SceneRecord
from .partition import PartitionScheme, make_partition, region_index


def iou(a: BBox, b: BBox) -> float:
    ax1, ay1, bx1, by1 = a.x + a.w, a.y + a.h, b.x + b.w, b.y + b.h
    iw = min(ax1, bx1) - max(a.x, b.x)
    ih = min(ay1, by1) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    # areas from corner differences, so identical boxes give exactly 1
    return inter / ((ax1 - a.x) * (ay1 - a.y) + (bx1 - b.x) * (by1 - b.y) - inter)


def iou_matrix(det: np.ndarray, gt: np.ndarray) -> np.ndarray:
    """IoU between ``(..., D, 4)`` and ``(..., G, 4)`` xywh arrays -> ``(..., D, G)``.

    Same operation order as :func:`iou`, so values agree bit for bit.
    """
    d = det[..., :, None, :]
    g = gt[..., None, :, :]
    dx1, dy1 = d[..., 0] + d[..., 2], d[..., 1] + d[..., 3]
    gx1, gy1 = g[..., 0] + g[..., 2], g[..., 1] + g[..., 3]
    iw = np.minimum(dx1, gx1) - np.maximum(d[..., 0], g[..., 0])
    ih = np.minimum(dy1, gy1) - np.maximum(d[..., 1], g[..., 1])
    ok = (iw > 0) & (ih > 0)
    inter = np.where(ok, iw * ih, 0.0)
    union = (dx1 - d[..., 0]) * (dy1 - d[..., 1]) + (gx1 - g[..., 0]) * (gy1 - g[..., 1]) - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(ok, inter / np.where(ok, union, 1.0), 0.0)
    return out


@dataclass(frozen=True)
class MatchLabel:
    det_index: int
    score: float
    is_tp: bool
    matched_gt: int | None = None


def match_detections(gts: Sequence[BBox], dets: Sequence[tuple[BBox, float]],
                     iou_thresh: float = 0.5) -> list[MatchLabel]:
    """Greedy matching for one scene.

    Detections are visited by descending score (stable).  Each takes the
    unmatched ground truth with the highest IoU at or above ``iou_thresh``;
    IoU ties go to the lowest ground-truth index.  Labels come back in
    detection input order.
    """
    order = sorted(range(len(dets)), key=lambda i: -dets[i][1])
    taken = [False] * len(gts)
    labels: list[MatchLabel | None] = [None] * len(dets)
    for i in order:
        box, score = dets[i]
        best, best_iou = None, -1.0
        for j, g in enumerate(gts):
            if taken[j]:
                continue
            v = iou(box, g)
            if v >= iou_thresh and v > best_iou:
                best, best_iou = j, v
        if best is not None:
            taken[best] = True
        labels[i] = MatchLabel(i, score, best is not None, best)
    return labels


def match_batch(gt_boxes: np.ndarray, gt_valid: np.ndarray, det_boxes: np.ndarray,
                det_scores: np.ndarray, det_valid: np.ndarray, iou_thresh: float = 0.5,
                ious: np.ndarray | None = None) -> np.ndarray:
    """Vectorised :func:`match_detections` over padded scenes.

    Shapes: ``gt_boxes (S, G, 4)``, ``gt_valid (S, G)``, ``det_boxes (S, D, 4)``,
    ``det_scores``/``det_valid (S, D)``.  Returns ``is_tp (S, D)``.  A
    precomputed ``iou_matrix(det_boxes, gt_boxes)`` may be passed as ``ious``.
    """
    S, D = det_scores.shape
    is_tp = np.zeros((S, D), dtype=bool)
    if D == 0 or gt_boxes.shape[1] == 0:
        return is_tp
    if ious is None:
        ious = iou_matrix(det_boxes, gt_boxes)
    ok = (ious >= iou_thresh) & gt_valid[:, None, :] & det_valid[:, :, None]
    key = np.where(det_valid, -det_scores, np.inf)
    order = np.argsort(key, axis=1, kind="stable")
    reachable = ok.any(axis=2)  # detections with no candidate can never match
    taken = np.zeros(gt_valid.shape, dtype=bool)
    rows = np.arange(S)
    for k in range(int(det_valid.sum(axis=1).max(initial=0))):
        di = order[:, k]
        r = rows[reachable[rows, di]]
        if r.size == 0:
            continue
        d = di[r]
        cand = ok[r, d] & ~taken[r]
        has = cand.any(axis=1)
        r, d = r[has], d[has]
        best = np.argmax(np.where(cand[has], ious[r, d], -1.0), axis=1)
        taken[r, best] = True
        is_tp[r, d] = True
    return is_tp


def average_precision_arrays(scores, is_tp, n_gt: int) -> float:
    if n_gt < 1:
        raise DomainError("average precision needs at least one ground-truth box")
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        return 0.0
    order = np.argsort(-scores, kind="stable")
    tp = np.asarray(is_tp, dtype=bool)[order]
    cum = np.cumsum(tp)
    precision = cum / np.arange(1, tp.size + 1)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    return float(envelope[tp].sum() / n_gt)


def average_precision(labels: Sequence[MatchLabel], n_gt: int) -> float:
    """All-points interpolated AP of pooled labels (ties kept in list order)."""
    return average_precision_arrays([l.score for l in labels], [l.is_tp for l in labels], n_gt)


@dataclass(frozen=True)
class RegionScore:
    region_id: str
    map50: float | None
    n_scenes: int
    n_gt: int
    n_det: int


def pad_by_scene(scene_ids: Sequence[str], items: Sequence, key_scene, key_box, key_score=None):
    """Pack per-scene boxes into padded arrays, preserving input order within a scene."""
    pos = {sid: i for i, sid in enumerate(scene_ids)}
    buckets: list[list] = [[] for _ in scene_ids]
    for it in items:
        buckets[pos[key_scene(it)]].append(it)
    width = max((len(b) for b in buckets), default=0)
    boxes = np.zeros((len(scene_ids), width, 4))
    valid = np.zeros((len(scene_ids), width), dtype=bool)
    scores = np.zeros((len(scene_ids), width))
    for i, b in enumerate(buckets):
        for j, it in enumerate(b):
            boxes[i, j] = key_box(it).as_list()
            valid[i, j] = True
            if key_score is not None:
                scores[i, j] = key_score(it)
    return boxes, valid, scores


def region_scores(region_of_scene: np.ndarray, n_regions: int, region_ids: Sequence[str],
                  det_scores: np.ndarray, det_valid: np.ndarray, is_tp: np.ndarray,
                  gt_valid: np.ndarray) -> list[RegionScore]:
    """Pool padded per-scene match results into one AP per region."""
    n_gt_scene = gt_valid.sum(axis=1)
    n_det_scene = det_valid.sum(axis=1)
    n_scenes = np.bincount(region_of_scene, minlength=n_regions)
    n_gt = np.bincount(region_of_scene, weights=n_gt_scene, minlength=n_regions).astype(int)
    n_det = np.bincount(region_of_scene, weights=n_det_scene, minlength=n_regions).astype(int)

    # flatten valid detections scene-major, then group stably by region
    flat_scene = np.broadcast_to(np.arange(det_valid.shape[0])[:, None], det_valid.shape)[det_valid]
    flat_region = region_of_scene[flat_scene]
    flat_score = det_scores[det_valid]
    flat_tp = is_tp[det_valid]
    grouping = np.argsort(flat_region, kind="stable")
    flat_region, flat_score, flat_tp = flat_region[grouping], flat_score[grouping], flat_tp[grouping]
    bounds = np.searchsorted(flat_region, np.arange(n_regions + 1))

    out = []
    for r in range(n_regions):
        if n_gt[r] == 0:
            val = None
        else:
            lo, hi = bounds[r], bounds[r + 1]
            val = average_precision_arrays(flat_score[lo:hi], flat_tp[lo:hi], int(n_gt[r]))
        out.append(RegionScore(region_ids[r], val, int(n_scenes[r]), int(n_gt[r]), int(n_det[r])))
    return out


def replicability_map(scenes: Sequence[SceneRecord], gts: Sequence[GroundTruthBox],
                      dets: Sequence[Detection], scheme: PartitionScheme,
                      iou_thresh: float = 0.5) -> list[RegionScore]:
    """Per-region mAP50 with detections and ground truth pooled over each region.

    Regions without ground truth get ``map50 = None``; regions with ground
    truth but no detections score 0.0.
    """
    scenes = list(scenes)
    ids = [s.scene_id for s in scenes]
    regions = make_partition(scheme)
    gt_boxes, gt_valid, _ = pad_by_scene(ids, gts, lambda g: g.scene_id, lambda g: g.bbox)
    det_boxes, det_valid, det_scores = pad_by_scene(
        ids, dets, lambda d: d.scene_id, lambda d: d.bbox, lambda d: d.score)
    is_tp = match_batch(gt_boxes, gt_valid, det_boxes, det_scores, det_valid, iou_thresh)
    where = region_index([s.lat for s in scenes], [s.lon for s in scenes], scheme) if scenes \
        else np.zeros(0, dtype=np.int64)
    return region_scores(where, len(regions), [r.region_id for r in regions],
                         det_scores, det_valid, is_tp, gt_valid)


def match_dump(scenes: Sequence[SceneRecord], gts: Sequence[GroundTruthBox],
               dets: Sequence[Detection], iou_thresh: float = 0.5) -> dict:
    """Per-scene match labels for auditing, keyed by scene id."""
    by_gt = defaultdict(list)
    by_det = defaultdict(list)
    for g in gts:
        by_gt[g.scene_id].append(g.bbox)
    for d in dets:
        by_det[d.scene_id].append((d.bbox, d.score))
    out = []
    for s in scenes:
        labels = match_detections(by_gt[s.scene_id], by_det[s.scene_id], iou_thresh)
        out.append({
            "scene_id": s.scene_id,
            "n_gt": len(by_gt[s.scene_id]),
            "labels": [{"det_index": l.det_index, "score": float(l.score), "is_tp": l.is_tp,
                        "matched_gt": l.matched_gt} for l in labels],
        })
    return {"format_version": 1, "iou_thresh": float(iou_thresh), "scenes": out}
