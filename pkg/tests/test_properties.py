"""Hypothesis-driven properties; the fixed-size sweeps live in the acceptance suite."""
import math

import numpy as np
from hypothesis import given, settings, strategies as st

from replimap.deteval import average_precision_arrays, iou
from replimap.geomodel import BBox, canonical_dumps, manifest_doc, parse_manifest
from replimap.hypotest import levene_test, paired_t_test, pearson
from replimap.partition import PartitionScheme, assign_point, make_partition
from replimap.spatialstats import build_weights, morans_i

SETTINGS = settings(max_examples=200, deadline=None, derandomize=True)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
boxes = st.tuples(st.floats(0, 200), st.floats(0, 200), st.floats(0.5, 60), st.floats(0.5, 60))


@SETTINGS
@given(boxes, boxes)
def test_iou_symmetric_bounded(a, b):
    v = iou(BBox(*a), BBox(*b))
    assert 0.0 <= v <= 1.0 + 1e-15
    assert v == iou(BBox(*b), BBox(*a))
    assert iou(BBox(*a), BBox(*a)) == 1.0


@SETTINGS
@given(st.lists(st.tuples(st.sampled_from([0.1, 0.4, 0.5, 0.9]), st.booleans()), max_size=20),
       st.integers(0, 4))
def test_ap_bounded_and_fp_deletion(labels, extra):
    scores = [s for s, _ in labels]
    tp = [t for _, t in labels]
    n_gt = sum(tp) + extra + 1
    ap = average_precision_arrays(scores, tp, n_gt)
    assert 0.0 <= ap <= 1.0
    keep = [i for i, t in enumerate(tp) if t]
    assert average_precision_arrays([scores[i] for i in keep], [True] * len(keep), n_gt) >= ap - 1e-12


@SETTINGS
@given(st.lists(st.tuples(finite, finite), min_size=2, max_size=15))
def test_paired_t_antisymmetric(pairs):
    a = [p[0] for p in pairs]
    b = [p[1] for p in pairs]
    d = [y - x for x, y in zip(a, b)]
    if max(d) == min(d):
        return
    ab, ba = paired_t_test(a, b), paired_t_test(b, a)
    assert ab.t == -ba.t and ab.p_two_sided == ba.p_two_sided


@SETTINGS
@given(st.lists(st.lists(finite, min_size=2, max_size=8), min_size=2, max_size=4), finite)
def test_levene_location_invariance(groups, shift):
    try:
        ref = levene_test(groups)
    except Exception:
        return
    moved = [groups[0]] + [[v + shift for v in g] for g in groups[1:]]
    assert math.isclose(levene_test(moved).w, ref.w, rel_tol=1e-6, abs_tol=1e-6)
    assert 0.0 <= ref.p <= 1.0


@SETTINGS
@given(st.lists(st.tuples(finite, finite), min_size=3, max_size=30),
       st.floats(0.01, 100), st.floats(-100, 100))
def test_pearson_sign_under_scaling(pairs, a, b):
    x = np.array([p[0] for p in pairs])
    y = np.array([p[1] for p in pairs])
    if np.ptp(x) < 1e-6 or np.ptp(y) < 1e-6:
        return
    r = pearson(x, y).r
    assert -1.0 <= r <= 1.0
    assert math.isclose(pearson(a * x + b, y).r, r, rel_tol=1e-7, abs_tol=1e-9)
    assert math.isclose(pearson(-a * x + b, y).r, -r, rel_tol=1e-7, abs_tol=1e-9)


_LAT = build_weights(make_partition(PartitionScheme.lat_strips()), "lat_path")


@SETTINGS
@given(st.lists(st.floats(-10, 10), min_size=18, max_size=18), st.permutations(range(18)))
def test_moran_relabel_invariance(values, perm):
    x = np.array(values)
    if np.ptp(x) < 1e-6:
        return
    # relabel regions: permute values and the edge list consistently
    inv = np.argsort(perm)
    edges = tuple(sorted(tuple(sorted((int(inv[i]), int(inv[j])))) for i, j in _LAT.edges))
    from replimap.spatialstats import WeightsMatrix
    w2 = WeightsMatrix(18, edges, "lat_path")
    assert math.isclose(morans_i(x[list(perm)], w2), morans_i(x, _LAT), rel_tol=1e-9, abs_tol=1e-12)


@SETTINGS
@given(st.floats(-90, 90), st.floats(-720, 720))
def test_assignment_total(lat, lon):
    for scheme in (PartitionScheme.grid(), PartitionScheme.lat_strips(), PartitionScheme.lon_strips()):
        regions = make_partition(scheme)
        r = regions[assign_point(lat, lon, scheme)]
        ln = lon % 360.0
        ln = 0.0 if ln >= 360.0 else ln
        assert r.lat_lo <= lat <= r.lat_hi and r.lon_lo <= ln < r.lon_hi


@SETTINGS
@given(st.lists(st.tuples(st.floats(-90, 90), st.floats(-180, 540)), min_size=1, max_size=5))
def test_manifest_round_trip(points):
    doc = {"format_version": 1, "scenes": [{"scene_id": f"s{i}", "lat_deg": la, "lon_deg": lo}
                                           for i, (la, lo) in enumerate(points)]}
    once = canonical_dumps(manifest_doc(parse_manifest(doc)))
    import json
    assert canonical_dumps(manifest_doc(parse_manifest(json.loads(once)))) == once
