"""Slow, independent reference implementations used only by the tests."""
from __future__ import annotations

from fractions import Fraction

import numpy as np


def raster_iou(a, b, scale: int = 1) -> float:
    """IoU by counting cells of a 1/scale pixel grid; exact for boxes on that grid."""
    size = int(max(a[0] + a[2], b[0] + b[2], a[1] + a[3], b[1] + b[3]) * scale) + 1
    ma = np.zeros((size, size), dtype=bool)
    mb = np.zeros((size, size), dtype=bool)
    for m, (x, y, w, h) in ((ma, a), (mb, b)):
        m[int(y * scale):int((y + h) * scale), int(x * scale):int((x + w) * scale)] = True
    union = np.count_nonzero(ma | mb)
    return np.count_nonzero(ma & mb) / union if union else 0.0


def exact_iou(a, b) -> Fraction:
    a = [Fraction(v) for v in a]
    b = [Fraction(v) for v in b]
    iw = min(a[0] + a[2], b[0] + b[2]) - max(a[0], b[0])
    ih = min(a[1] + a[3], b[1] + b[3]) - max(a[1], b[1])
    if iw <= 0 or ih <= 0:
        return Fraction(0)
    inter = iw * ih
    return inter / (a[2] * a[3] + b[2] * b[3] - inter)


def greedy_labels(gts, dets, thresh=Fraction(1, 2)):
    """Per-scene greedy matching from scratch; dets are (box, score)."""
    order = sorted(range(len(dets)), key=lambda i: (-dets[i][1], i))
    free = set(range(len(gts)))
    tp = [False] * len(dets)
    for i in order:
        cands = [(exact_iou(dets[i][0], gts[j]), -j) for j in free]
        cands = [c for c in cands if c[0] >= thresh]
        if cands:
            _, negj = max(cands)
            free.discard(-negj)
            tp[i] = True
    return tp


def pr_integration_ap(scores, tps, n_gt: int) -> float:
    """All-points AP: walk the ranked list, at every recall step take the best
    precision at that recall or beyond, integrate exactly in fractions."""
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    prec, rec = [], []
    hits = 0
    for k, i in enumerate(order, start=1):
        hits += bool(tps[i])
        prec.append(Fraction(hits, k))
        rec.append(Fraction(hits, n_gt))
    ap = Fraction(0)
    last = Fraction(0)
    for k in range(len(order)):
        if rec[k] > last:
            ap += (rec[k] - last) * max(prec[j] for j in range(k, len(order)))
            last = rec[k]
    return float(ap)


def oracle_map(scenes, gts, dets, regions_of_scene: dict, region_ids):
    """Per-region AP with matching redone per scene and labels pooled in scene order."""
    out = {}
    for rid in region_ids:
        sids = [s for s in scenes if regions_of_scene[s] == rid]
        n_gt = sum(1 for g in gts if g[0] in sids)
        if n_gt == 0:
            out[rid] = None
            continue
        scores, tps = [], []
        for s in sids:
            sg = [g[1] for g in gts if g[0] == s]
            sd = [(d[1], d[2]) for d in dets if d[0] == s]
            tps += greedy_labels(sg, sd)
            scores += [d[1] for d in sd]
        out[rid] = pr_integration_ap(scores, tps, n_gt)
    return out


# distribution kernels by direct quadrature of the densities ---------------------

def _mp():
    import mpmath
    mpmath.mp.dps = 30
    return mpmath


def normal_cdf_quad(z: float) -> float:
    mp = _mp()
    return float(mp.mpf(1) / 2 + mp.quad(lambda x: mp.exp(-x * x / 2), [0, z]) / mp.sqrt(2 * mp.pi))


def t_cdf_quad(t: float, df: float) -> float:
    mp = _mp()
    v = mp.mpf(df)
    c = mp.gamma((v + 1) / 2) / (mp.sqrt(v * mp.pi) * mp.gamma(v / 2))
    return float(mp.mpf(1) / 2 + mp.quad(lambda x: c * (1 + x * x / v) ** (-(v + 1) / 2), [0, t]))


def f_cdf_quad(f: float, df1: float, df2: float) -> float:
    mp = _mp()
    d1, d2 = mp.mpf(df1), mp.mpf(df2)
    c = (d1 / d2) ** (d1 / 2) / mp.beta(d1 / 2, d2 / 2)
    pts = [0, f] if f <= 1 else [0, 1, f]
    return float(mp.quad(lambda x: c * x ** (d1 / 2 - 1) * (1 + d1 * x / d2) ** (-(d1 + d2) / 2), pts))


def kernel_lattice():
    """Fixed 1,000-point lattice: (kind, args) tuples."""
    pts = [("normal", (-8.0 + 16.0 * i / 333,)) for i in range(334)]
    dfs = (1, 2, 3, 5, 10, 30, 100)
    pts += [("t", (-12.0 + 24.0 * i / 332, dfs[i % 7])) for i in range(333)]
    d1s, d2s = (1, 2, 3, 5, 10), (1, 2, 4, 8, 20, 60)
    pts += [("f", (30.0 * (i / 332) ** 2, d1s[i % 5], d2s[i % 6])) for i in range(333)]
    return pts
