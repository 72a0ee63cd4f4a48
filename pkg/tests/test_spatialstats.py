import numpy as np
import pytest

from replimap.errors import DegenerateError, DomainError, InsufficientDataError, ZeroVarianceError
from replimap.partition import PartitionScheme, make_partition
from replimap.rng import RngStream
from replimap.spatialstats import (WeightsMatrix, build_weights, grid_weights, moran_permutation_test,
                                   morans_i)


def _dense_moran(x, w):
    z = np.asarray(x, float) - np.mean(x)
    return len(x) / w.sum() * (z @ w @ z) / (z @ z)


def test_weights_examples():
    lat = build_weights(make_partition(PartitionScheme.lat_strips()), "lat_path")
    assert len(lat.edges) == 17
    assert lat.degree[0] == lat.degree[-1] == 1 and set(lat.degree[1:-1]) == {2}
    lon = build_weights(make_partition(PartitionScheme.lon_strips()), "lon_cycle")
    assert len(lon.edges) == 18 and set(lon.degree) == {2}
    assert (0, 17) in lon.edges
    g = grid_weights(2, 2, wrap=False)
    assert g.edges == ((0, 1), (0, 2), (1, 3), (2, 3))


def test_grid_weights_wrap_meridian():
    w = build_weights(make_partition(PartitionScheme.grid()), "grid_rook_wrap")
    assert (0, 35) in w.edges
    assert set(w.degree[36:-36]) == {4} and set(w.degree[:36]) == {3}
    q = build_weights(make_partition(PartitionScheme.grid()), "grid_queen_wrap")
    assert set(q.degree[36:-36]) == {8}
    d = w.dense()
    assert (d == d.T).all() and not d.diagonal().any()


def test_kind_scheme_mismatch():
    with pytest.raises(DomainError):
        build_weights(make_partition(PartitionScheme.grid()), "lon_cycle")
    with pytest.raises(DomainError):
        build_weights(make_partition(PartitionScheme.lat_strips()), "grid_rook_wrap")
    with pytest.raises(DomainError):
        build_weights(make_partition(PartitionScheme.lat_strips()), "distance")


def test_checkerboard_exact():
    w = grid_weights(2, 2, wrap=False)
    assert morans_i([1, 0, 0, 1], w) == -1.0
    assert w.s0 == 8.0


def test_moran_matches_dense_formula():
    rng = np.random.default_rng(0)
    w = build_weights(make_partition(PartitionScheme.grid(30, 30)), "grid_queen_wrap")
    x = rng.normal(size=w.n)
    assert morans_i(x, w) == pytest.approx(_dense_moran(x, w.dense()), rel=1e-12)
    wr = WeightsMatrix(w.n, w.edges, w.kind, "row")
    assert morans_i(x, wr) == pytest.approx(_dense_moran(x, wr.dense()), rel=1e-12)


def test_nulls_dropped_with_edges():
    w = build_weights(make_partition(PartitionScheme.lat_strips()), "lat_path")
    x = list(np.linspace(0, 1, 18))
    x[5] = None
    keep = [i for i in range(18) if i != 5]
    sub = w.dense()[np.ix_(keep, keep)]
    assert morans_i(x, w) == pytest.approx(_dense_moran([x[i] for i in keep], sub), rel=1e-12)


def test_moran_errors():
    w = grid_weights(2, 2, wrap=False)
    with pytest.raises(ZeroVarianceError):
        morans_i([3, 3, 3, 3], w)
    with pytest.raises(InsufficientDataError):
        morans_i([1, None, None, None], w)
    with pytest.raises(InsufficientDataError):
        morans_i([1, None, None, 0], w)  # diagonal pair has no edge
    with pytest.raises(DegenerateError):
        moran_permutation_test([1, 0, None, None], w, 99, RngStream(0, "x"))


def test_monotone_strip_sequence_positive():
    w = build_weights(make_partition(PartitionScheme.lat_strips()), "lat_path")
    assert morans_i(np.arange(18.0), w) > 0
    assert morans_i(np.arange(18.0) ** 3, w) > 0


def test_permutation_result_fields():
    w = build_weights(make_partition(PartitionScheme.lat_strips()), "lat_path")
    x = np.arange(18.0)
    r = moran_permutation_test(x, w, 999, RngStream(5, "m"))
    assert r.pseudo_p == 0.001
    assert r.e_null == pytest.approx(-1 / 17)
    assert r.z_sim > 3
    rep = r.report()
    assert set(rep) == {"test", "kind", "n_used", "i_obs", "e_null", "pseudo_p", "z_sim", "n_perm", "seed"}
    assert rep["seed"] == 5 and rep["kind"] == "lat_path"


def test_permutation_threads_and_chunks_do_not_matter():
    w = build_weights(make_partition(PartitionScheme.lon_strips()), "lon_cycle")
    x = np.random.default_rng(2).normal(size=18)
    a = moran_permutation_test(x, w, 2500, RngStream(1, "m"), threads=1)
    b = moran_permutation_test(x, w, 2500, RngStream(1, "m"), threads=8, chunk=300)
    assert a == b
    c = moran_permutation_test(x, w, 2500, RngStream(2, "m"))
    assert c.pseudo_p != a.pseudo_p or c.z_sim != a.z_sim
